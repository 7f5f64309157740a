#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace qflux {

// Exact rational with a positive, reduced denominator.
class Rational {
public:
    Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }
    double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

    // Best continued-fraction approximation with den <= max_den, accepted only
    // if it reproduces x to within rel_tol.
    static std::optional<Rational> from_double(double x, std::int64_t max_den = 64,
                                               double rel_tol = 1e-12);
    // Accepts "p/q", "p" or a decimal literal.
    static Rational parse(const std::string& text, std::int64_t max_den = 64);

    std::string str() const;

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    friend bool operator==(const Rational& a, const Rational& b) noexcept {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }

private:
    std::int64_t num_{0};
    std::int64_t den_{1};
};

std::int64_t lcm64(std::int64_t a, std::int64_t b);

}  // namespace qflux
