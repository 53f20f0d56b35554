#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "vpsim/errors.hpp"

namespace vpsim {

// Neumaier compensated accumulator.  Used wherever a sum must be bit-stable
// across worker counts: the summation order is fixed by the caller and the
// compensation keeps long sums faithfully rounded.
class Accumulator {
  public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(const std::vector<double>& xs) {
    Accumulator acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1] (QUADPACK dqk15).
constexpr double kGk15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.000000000000000};
constexpr double kGk15WeightsK[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
constexpr double kGk15WeightsG[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <class F>
void gk15(const F& f, double a, double b, double& kronrod, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kGk15Nodes[i]);
        fv[14 - i] = f(c + h * kGk15Nodes[i]);
    }
    fv[7] = f(c);
    double resk = kGk15WeightsK[7] * fv[7];
    double resg = kGk15WeightsG[3] * fv[7];
    for (int i = 0; i < 7; ++i) {
        resk += kGk15WeightsK[i] * (fv[i] + fv[14 - i]);
        if (i % 2 == 1) resg += kGk15WeightsG[i / 2] * (fv[i] + fv[14 - i]);
    }
    kronrod = resk * h;
    err = std::abs((resk - resg) * h);
}

}  // namespace detail

// Adaptive Gauss-Kronrod quadrature over [a, b].  Bisects the segment with the
// largest error estimate until the total satisfies the tolerance.  Throws
// NumericalError when the budget runs out (pathological integrand/parameters).
template <class F>
double integrate(const F& f, double a, double b, double rel_tol = 1e-10,
                 double abs_tol = 0.0, std::size_t max_segments = 4096) {
    if (a == b) return 0.0;
    struct Segment {
        double a, b, value, error;
    };
    std::vector<Segment> segs;
    double v, e;
    detail::gk15(f, a, b, v, e);
    segs.push_back({a, b, v, e});
    for (;;) {
        double total = 0.0, err = 0.0;
        for (const auto& s : segs) {
            total += s.value;
            err += s.error;
        }
        if (!std::isfinite(total))
            throw NumericalError("quadrature: non-finite integrand");
        if (err <= std::max(abs_tol, rel_tol * std::abs(total))) return total;
        if (segs.size() >= max_segments)
            throw NumericalError("quadrature did not converge");
        std::size_t worst = 0;
        for (std::size_t i = 1; i < segs.size(); ++i)
            if (segs[i].error > segs[worst].error) worst = i;
        const Segment s = segs[worst];
        const double m = 0.5 * (s.a + s.b);
        Segment left{s.a, m, 0, 0}, right{m, s.b, 0, 0};
        detail::gk15(f, left.a, left.b, left.value, left.error);
        detail::gk15(f, right.a, right.b, right.value, right.error);
        segs[worst] = left;
        segs.push_back(right);
    }
}

// Tabulated CDF of an unnormalized radial density on [0, r_max], with
// log-spaced nodes refined toward zero.  Supports forward evaluation and
// inverse transform sampling.
class CdfTable {
  public:
    template <class Density>
    CdfTable(const Density& pdf, double r_max, std::size_t nodes = 4096) {
        if (!(r_max > 0.0)) throw NumericalError("CdfTable: r_max must be positive");
        r_.resize(nodes + 1);
        c_.resize(nodes + 1);
        r_[0] = 0.0;
        c_[0] = 0.0;
        const double r_min = r_max * 1e-5;
        const double ratio = std::log(r_max / r_min) / static_cast<double>(nodes - 1);
        for (std::size_t k = 1; k <= nodes; ++k)
            r_[k] = r_min * std::exp(ratio * static_cast<double>(k - 1));
        r_[nodes] = r_max;
        Accumulator acc;
        for (std::size_t k = 1; k <= nodes; ++k) {
            double v, e;
            detail::gk15(pdf, r_[k - 1], r_[k], v, e);
            acc.add(v);
            c_[k] = acc.value();
        }
        total_ = c_.back();
        if (!(total_ > 0.0) || !std::isfinite(total_))
            throw NumericalError("CdfTable: density has non-positive mass");
    }

    double total() const { return total_; }
    double r_max() const { return r_.back(); }

    // CDF value (normalized to [0, 1]) at radius r, linear between nodes.
    double cdf(double r) const {
        if (r <= 0.0) return 0.0;
        if (r >= r_.back()) return 1.0;
        const auto it = std::upper_bound(r_.begin(), r_.end(), r);
        const std::size_t k = static_cast<std::size_t>(it - r_.begin());
        const double t = (r - r_[k - 1]) / (r_[k] - r_[k - 1]);
        return (c_[k - 1] + t * (c_[k] - c_[k - 1])) / total_;
    }

    // Inverse CDF: u in [0, 1) -> radius, linear between nodes.
    double sample(double u) const {
        const double target = u * total_;
        const auto it = std::upper_bound(c_.begin(), c_.end(), target);
        if (it == c_.end()) return r_.back();
        const std::size_t k = static_cast<std::size_t>(it - c_.begin());
        if (k == 0) return 0.0;
        const double span = c_[k] - c_[k - 1];
        const double t = span > 0.0 ? (target - c_[k - 1]) / span : 0.0;
        return std::min(r_.back(), r_[k - 1] + t * (r_[k] - r_[k - 1]));
    }

  private:
    std::vector<double> r_, c_;
    double total_ = 0.0;
};

struct PowerLawFit {
    double slope = 0.0;      // exponent of y ~ x^slope
    double intercept = 0.0;  // log-amplitude
    double residual_rms = 0.0;
    std::size_t points = 0;
};

// Ordinary least squares on (log x, log y).  Skips non-positive entries.
inline PowerLawFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    PowerLawFit fit;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    fit.points = lx.size();
    if (fit.points < 2) throw NumericalError("fit_power_law: need at least two positive points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(ly.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw NumericalError("fit_power_law: degenerate abscissae");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / static_cast<double>(lx.size()));
    return fit;
}

// Plain linear least squares y = a + b x.
struct LinearFit {
    double slope = 0.0, intercept = 0.0, residual_rms = 0.0;
};

inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw NumericalError("fit_linear: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw NumericalError("fit_linear: degenerate abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / static_cast<double>(x.size()));
    return fit;
}

}  // namespace vpsim
