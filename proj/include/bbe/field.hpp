#pragma once

#include "bbe/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace bbe {

/// Per-point quantities shared by every field evaluated at the same velocity.
struct PointCache {
    Vec3 v;
    double r2;  // |v|^2
    double mu;  // exp(-|v|^2 / 2)
    double mu4; // exp(-|v|^2 / 8) = mu^(1/4)

    explicit PointCache(const Vec3& vel)
        : v(vel)
        , r2(norm2(vel))
        , mu(0.0)
        , mu4(std::exp(-0.125 * r2))
    {
        const double m2 = mu4 * mu4;
        mu = m2 * m2;
    }
};

namespace detail {

inline double ipow(double x, int n)
{
    if (n < 0)
        return 1.0 / ipow(x, -n);
    double r = 1.0;
    while (n) {
        if (n & 1)
            r *= x;
        x *= x;
        n >>= 1;
    }
    return r;
}

} // namespace detail

/// One term: coef * v1^a v2^b v3^c * mu^(q/4) * (1 - rho mu)^k.
struct Term {
    double coef = 0.0;
    std::array<int, 3> pow{0, 0, 0};
    int mu_quarters = 0;
    int factor_power = 0;

    int degree() const { return pow[0] + pow[1] + pow[2]; }
    auto key() const { return std::tie(pow, mu_quarters, factor_power); }
};

/// Closed-form test function on R^3: a finite sum of Terms sharing one fugacity
/// for their (1 - rho mu) factors.
///
/// Representable set: Gaussian powers mu^(q/4) with q in [-4, 16], factor powers
/// in [-4, 4] and monomial degree <= 12. Products leaving this set throw
/// ClosureError.
class AnalyticField {
public:
    static constexpr int min_mu_quarters = -4;
    static constexpr int max_mu_quarters = 16;
    static constexpr int max_factor_power = 4;
    static constexpr int max_degree = 12;

    AnalyticField() = default;

    static AnalyticField zero() { return {}; }

    static AnalyticField constant(double c) { return from_term({c, {0, 0, 0}, 0, 0}); }

    /// c * v1^a v2^b v3^c
    static AnalyticField monomial(double c, int a, int b, int d) { return from_term({c, {a, b, d}, 0, 0}); }

    /// mu^(q/4)
    static AnalyticField mu_power_quarters(int q) { return from_term({1.0, {0, 0, 0}, q, 0}); }

    /// (1 - rho mu)^k
    static AnalyticField rho_factor(double rho, int k)
    {
        AnalyticField f = from_term({1.0, {0, 0, 0}, 0, k});
        if (k != 0)
            f.rho_ = rho;
        return f;
    }

    /// |v|^2 as a three-term polynomial.
    static AnalyticField speed_squared()
    {
        return monomial(1.0, 2, 0, 0) + monomial(1.0, 0, 2, 0) + monomial(1.0, 0, 0, 2);
    }

    static AnalyticField from_term(const Term& t)
    {
        AnalyticField f;
        check_term(t);
        if (t.coef != 0.0)
            f.terms_.push_back(t);
        return f;
    }

    const std::vector<Term>& terms() const { return terms_; }
    std::optional<double> rho() const { return rho_; }
    bool empty() const { return terms_.empty(); }

    int max_degree_used() const
    {
        int d = 0;
        for (const auto& t : terms_)
            d = std::max(d, std::max({t.pow[0], t.pow[1], t.pow[2]}));
        return d;
    }

    int min_mu_quarters_used() const
    {
        int q = max_mu_quarters;
        for (const auto& t : terms_)
            q = std::min(q, t.mu_quarters);
        return q;
    }

    double operator()(const Vec3& v) const { return eval(PointCache(v)); }

    double eval(const PointCache& p) const
    {
        if (terms_.empty())
            return 0.0;
        const int deg = max_degree_used();
        std::array<double, max_degree + 1> px{}, py{}, pz{};
        px[0] = py[0] = pz[0] = 1.0;
        for (int i = 1; i <= deg; ++i) {
            px[i] = px[i - 1] * p.v.x;
            py[i] = py[i - 1] * p.v.y;
            pz[i] = pz[i - 1] * p.v.z;
        }
        const double base = 1.0 - rho_.value_or(0.0) * p.mu;
        double sum = 0.0;
        for (const auto& t : terms_) {
            double val = t.coef * px[t.pow[0]] * py[t.pow[1]] * pz[t.pow[2]];
            if (t.mu_quarters > 0)
                val *= detail::ipow(p.mu4, t.mu_quarters);
            else if (t.mu_quarters < 0)
                val *= std::exp(-0.125 * t.mu_quarters * p.r2);
            if (t.factor_power != 0)
                val *= detail::ipow(base, t.factor_power);
            sum += val;
        }
        return sum;
    }

    AnalyticField& operator+=(const AnalyticField& o)
    {
        merge_rho(o);
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        normalize();
        return *this;
    }

    AnalyticField& operator*=(double c)
    {
        if (c == 0.0) {
            terms_.clear();
            rho_.reset();
            return *this;
        }
        for (auto& t : terms_)
            t.coef *= c;
        return *this;
    }

    friend AnalyticField operator+(AnalyticField a, const AnalyticField& b) { return a += b; }
    friend AnalyticField operator-(AnalyticField a, const AnalyticField& b)
    {
        AnalyticField nb = b;
        nb *= -1.0;
        return a += nb;
    }
    friend AnalyticField operator*(double c, AnalyticField a) { return a *= c; }
    friend AnalyticField operator*(AnalyticField a, double c) { return a *= c; }

    friend AnalyticField operator*(const AnalyticField& a, const AnalyticField& b)
    {
        AnalyticField out;
        out.rho_ = a.rho_;
        out.merge_rho(b);
        out.terms_.reserve(a.terms_.size() * b.terms_.size());
        for (const auto& ta : a.terms_) {
            for (const auto& tb : b.terms_) {
                Term t;
                t.coef = ta.coef * tb.coef;
                for (int i = 0; i < 3; ++i)
                    t.pow[i] = ta.pow[i] + tb.pow[i];
                t.mu_quarters = ta.mu_quarters + tb.mu_quarters;
                t.factor_power = ta.factor_power + tb.factor_power;
                check_term(t);
                out.terms_.push_back(t);
            }
        }
        out.normalize();
        return out;
    }

private:
    static void check_term(const Term& t)
    {
        if (t.mu_quarters < min_mu_quarters || t.mu_quarters > max_mu_quarters)
            throw ClosureError("Gaussian power mu^(" + std::to_string(t.mu_quarters) +
                               "/4) outside the representable range");
        if (std::abs(t.factor_power) > max_factor_power)
            throw ClosureError("factor (1 - rho mu)^" + std::to_string(t.factor_power) +
                               " outside the representable range");
        if (t.pow[0] < 0 || t.pow[1] < 0 || t.pow[2] < 0 || t.degree() > max_degree)
            throw ClosureError("monomial degree outside the representable range");
    }

    void merge_rho(const AnalyticField& o)
    {
        if (!o.rho_)
            return;
        if (rho_ && *rho_ != *o.rho_)
            throw ClosureError("cannot combine (1 - rho mu) factors with different fugacities");
        rho_ = o.rho_;
    }

    void normalize()
    {
        std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) { return a.key() < b.key(); });
        std::vector<Term> merged;
        merged.reserve(terms_.size());
        for (const auto& t : terms_) {
            if (!merged.empty() && merged.back().key() == t.key())
                merged.back().coef += t.coef;
            else
                merged.push_back(t);
        }
        std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
        terms_ = std::move(merged);
        const bool any_factor =
            std::any_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.factor_power != 0; });
        if (!any_factor)
            rho_.reset();
    }

    std::vector<Term> terms_;
    std::optional<double> rho_;
};

inline AnalyticField add(const AnalyticField& f, const AnalyticField& g) { return f + g; }
inline AnalyticField scale(double c, const AnalyticField& f) { return c * f; }
inline AnalyticField multiply_weight(const AnalyticField& f, const AnalyticField& w) { return f * w; }

// Common building blocks.
inline AnalyticField mu_field() { return AnalyticField::mu_power_quarters(4); }
inline AnalyticField sqrt_mu_field() { return AnalyticField::mu_power_quarters(2); }

/// N_rho = mu^(1/2) / (1 - rho mu)
inline AnalyticField n_rho_field(double rho)
{
    return AnalyticField::mu_power_quarters(2) * AnalyticField::rho_factor(rho, -1);
}

/// M_rho = mu / (1 - rho mu)
inline AnalyticField m_rho_field(double rho)
{
    return AnalyticField::mu_power_quarters(4) * AnalyticField::rho_factor(rho, -1);
}

/// N_rho^{-1} f = (1 - rho mu) mu^{-1/2} f
inline AnalyticField divide_by_n_rho(const AnalyticField& f, double rho)
{
    return f * (AnalyticField::mu_power_quarters(-2) * AnalyticField::rho_factor(rho, 1));
}

/// mu^{-1/2} f
inline AnalyticField divide_by_sqrt_mu(const AnalyticField& f) { return f * AnalyticField::mu_power_quarters(-2); }

} // namespace bbe
