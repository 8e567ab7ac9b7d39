#pragma once

// Adaptive Gauss-Legendre quadrature.
//
// Each panel is integrated with the 10-point rule and with the same rule on
// its two halves; their difference is the panel's error estimate. Panels
// with the largest estimate are bisected until the summed estimate meets
// max(abs_tol, rel_tol * |value|) or the panel budget is exhausted.

#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace netsub {

struct QuadratureOptions {
    double abs_tol = 1e-8;
    double rel_tol = 0.0;
    std::size_t max_panels = 4000;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    std::size_t evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 5> kGaussLegendreNodes{
    0.1488743389816312108848260, 0.4333953941292471907992659, 0.6794095682990244062343274,
    0.8650633666889845107320967, 0.9739065285171717200779640};
inline constexpr std::array<double, 5> kGaussLegendreWeights{
    0.2955242247147528701738930, 0.2692667193099963550912269, 0.2190863625159820439955349,
    0.1494513491505805931457763, 0.0666713443086881375935688};

template <class F>
double gauss_legendre10(F& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t k = 0; k < kGaussLegendreNodes.size(); ++k) {
        const double dx = half * kGaussLegendreNodes[k];
        sum += kGaussLegendreWeights[k] * (f(mid - dx) + f(mid + dx));
    }
    return sum * half;
}

struct Panel {
    double a, b;
    double left, right;  // 10-point estimates on each half
    double error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

}  // namespace detail

template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
    QuadratureResult out;
    if (!(b > a)) return out;

    auto make_panel = [&](double lo, double hi, double whole) {
        const double mid = 0.5 * (lo + hi);
        detail::Panel p{lo, hi, detail::gauss_legendre10(f, lo, mid),
                        detail::gauss_legendre10(f, mid, hi), 0.0};
        p.error = std::abs(p.left + p.right - whole);
        out.evaluations += 20;
        return p;
    };

    const double whole = detail::gauss_legendre10(f, a, b);
    out.evaluations += 10;
    std::priority_queue<detail::Panel> heap;
    heap.push(make_panel(a, b, whole));

    double value = heap.top().left + heap.top().right;
    double error = heap.top().error;
    std::size_t panels = 1;

    while (error > std::max(opts.abs_tol, opts.rel_tol * std::abs(value))) {
        if (panels >= opts.max_panels || !std::isfinite(error)) {
            out.converged = false;
            break;
        }
        detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        detail::Panel lo = make_panel(worst.a, mid, worst.left);
        detail::Panel hi = make_panel(mid, worst.b, worst.right);
        value += (lo.left + lo.right + hi.left + hi.right) - (worst.left + worst.right);
        error += lo.error + hi.error - worst.error;
        heap.push(lo);
        heap.push(hi);
        ++panels;
    }

    // Re-sum to shed the drift of the running updates.
    double v = 0.0, e = 0.0;
    while (!heap.empty()) {
        v += heap.top().left + heap.top().right;
        e += heap.top().error;
        heap.pop();
    }
    out.value = v;
    out.error = e;
    return out;
}

}  // namespace netsub
