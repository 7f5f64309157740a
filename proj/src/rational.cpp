#include "qflux/rational.hpp"

#include "qflux/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>

namespace qflux {

Rational::Rational(std::int64_t num, std::int64_t den) {
    if (den == 0) {
        throw DomainError("Rational: zero denominator");
    }
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    num_ = num / (g == 0 ? 1 : g);
    den_ = den / (g == 0 ? 1 : g);
}

std::optional<Rational> Rational::from_double(double x, std::int64_t max_den, double rel_tol) {
    if (!std::isfinite(x) || std::abs(x) > 1e12) {
        return std::nullopt;
    }
    // Convergents h/k of the continued fraction of x.
    std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(x));
    std::int64_t k_prev = 0, k = 1;
    double frac = x - std::floor(x);
    const double scale = std::max(std::abs(x), 1.0);
    for (int iter = 0; iter < 64; ++iter) {
        if (std::abs(static_cast<double>(h) / static_cast<double>(k) - x) <= rel_tol * scale) {
            return Rational(h, k);
        }
        if (frac < 1e-15) {
            break;
        }
        const double inv = 1.0 / frac;
        const auto a = static_cast<std::int64_t>(std::floor(inv));
        frac = inv - std::floor(inv);
        const std::int64_t h_next = a * h + h_prev;
        const std::int64_t k_next = a * k + k_prev;
        if (k_next > max_den) {
            break;
        }
        h_prev = h;
        h = h_next;
        k_prev = k;
        k = k_next;
    }
    return std::nullopt;
}

Rational Rational::parse(const std::string& text, std::int64_t max_den) {
    const auto slash = text.find('/');
    try {
        if (slash != std::string::npos) {
            std::size_t used_a = 0, used_b = 0;
            const std::string a = text.substr(0, slash), b = text.substr(slash + 1);
            const long long num = std::stoll(a, &used_a);
            const long long den = std::stoll(b, &used_b);
            if (used_a != a.size() || used_b != b.size() || den == 0) {
                throw ConfigError("not a rational: '" + text + "'");
            }
            Rational r(num, den);
            if (r.den() > max_den) {
                throw ConfigError("denominator exceeds " + std::to_string(max_den) + ": '" + text + "'");
            }
            return r;
        }
        std::size_t used = 0;
        const double x = std::stod(text, &used);
        if (used != text.size()) {
            throw ConfigError("not a number: '" + text + "'");
        }
        auto r = from_double(x, max_den);
        if (!r) {
            throw ConfigError("no rational with denominator <= " + std::to_string(max_den) +
                              " matches '" + text + "'");
        }
        return *r;
    } catch (const std::logic_error&) {
        throw ConfigError("not a rational: '" + text + "'");
    }
}

std::string Rational::str() const {
    return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
    const std::int64_t l = lcm64(a.den_, b.den_);
    return Rational(a.num_ * (l / a.den_) + b.num_ * (l / b.den_), l);
}

Rational operator-(const Rational& a, const Rational& b) {
    return a + Rational(-b.num_, b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
    const std::int64_t g1 = std::gcd(std::abs(a.num_), b.den_);
    const std::int64_t g2 = std::gcd(std::abs(b.num_), a.den_);
    const std::int64_t n1 = a.num_ / (g1 ? g1 : 1), d2 = b.den_ / (g1 ? g1 : 1);
    const std::int64_t n2 = b.num_ / (g2 ? g2 : 1), d1 = a.den_ / (g2 ? g2 : 1);
    return Rational(n1 * n2, d1 * d2);
}

Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) {
        throw DomainError("Rational: division by zero");
    }
    return a * Rational(b.den_, b.num_);
}

std::int64_t lcm64(std::int64_t a, std::int64_t b) {
    return std::lcm(a, b);
}

}  // namespace qflux
