#include "netsub/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace netsub {

void UtilityParams::validate() const {
    if (!std::isfinite(gamma) || gamma <= 1.0) throw InvalidArgument("gamma must be > 1");
    if (!std::isfinite(alpha) || alpha < 0.0) throw InvalidArgument("alpha must be >= 0");
    if (!std::isfinite(beta_cost) || beta_cost <= 0.0)
        throw InvalidArgument("beta_cost must be > 0");
    if (!std::isfinite(beta_coverage)) throw InvalidArgument("beta_coverage must be finite");
    if (!std::isfinite(delta) || delta <= 0.0 || delta > 1.0)
        throw InvalidArgument("delta must lie in (0, 1]");
}

double monthly_discount(double annual) {
    if (!(annual > 0.0 && annual <= 1.0)) throw InvalidArgument("annual discount must be in (0,1]");
    return std::pow(annual, 1.0 / 12.0);
}

namespace {

void check_inputs(double epsilon, double cost) {
    if (!std::isfinite(epsilon) || !std::isfinite(cost))
        throw InvalidArgument("shock and cost must be finite");
    if (epsilon <= 0.0) throw InvalidArgument("shock must be > 0");
}

// Surplus at the optimum given k = 1 - beta_cost * c > 0.
inline double surplus_at(double epsilon, double k, const UtilityParams& p, double r) {
    const double x = epsilon * k - p.alpha;
    if (x <= 0.0) return 0.0;
    return (p.gamma - 1.0) / (p.beta_cost * p.gamma) * std::pow(x, r) / epsilon;
}

inline double duration_at(double epsilon, double k, const UtilityParams& p, double q) {
    const double x = epsilon * k - p.alpha;
    if (x <= 0.0) return 0.0;
    return std::pow(x, q);
}

constexpr double kLowestZ = -12.0;

// Integrates f over [z_lo, inf) in standardized log-shock units: first up to
// the (1 - tail) quantile, then unit panels until past the integrand's peak
// and negligible.
template <class F>
QuadratureResult integrate_standardized(F&& f, double z_lo, double z_peak, double upper_tail,
                                        const QuadratureOptions& opts) {
    const double z_base = std::max(z_lo, standard_normal_quantile(1.0 - upper_tail));
    QuadratureResult total = integrate(f, z_lo, z_base, opts);
    double z = z_base;
    for (int panel = 0; panel < 200; ++panel) {
        QuadratureResult piece = integrate(f, z, z + 1.0, opts);
        total.value += piece.value;
        total.error += piece.error;
        total.evaluations += piece.evaluations;
        total.converged = total.converged && piece.converged;
        z += 1.0;
        const double negligible =
            0.01 * std::max(opts.abs_tol, opts.rel_tol * std::abs(total.value));
        if (z > z_peak + 1.0 && std::abs(piece.value) <= negligible) return total;
    }
    total.converged = false;
    return total;
}

}  // namespace

double censoring_threshold(double cost, const UtilityParams& params) {
    const double k = 1.0 - params.beta_cost * cost;
    if (k <= 0.0) return std::numeric_limits<double>::infinity();
    return params.alpha / k;
}

double optimal_duration(double epsilon, double cost, const UtilityParams& params) {
    check_inputs(epsilon, cost);
    const double k = 1.0 - params.beta_cost * cost;
    if (k <= 0.0) return 0.0;
    return duration_at(epsilon, k, params, params.duration_exponent());
}

double call_surplus(double epsilon, double cost, const UtilityParams& params) {
    check_inputs(epsilon, cost);
    const double k = 1.0 - params.beta_cost * cost;
    if (k <= 0.0) return 0.0;
    return surplus_at(epsilon, k, params, params.surplus_exponent());
}

QuadratureResult shifted_power_moment(double m, double sigma, double power, int inverse_w,
                                      const QuadratureOptions& opts, double upper_tail) {
    auto f = [=](double z) {
        const double u = m + sigma * z;
        const double x = std::expm1(u);
        if (x <= 0.0) return 0.0;
        double v = std::pow(x, power) * standard_normal_pdf(z);
        if (inverse_w) v *= std::exp(-u);
        return v;
    };
    const double z_lo = std::max(-m / sigma, kLowestZ);
    const double z_peak = (power - inverse_w) * sigma;
    return integrate_standardized(f, z_lo, z_peak, upper_tail, opts);
}

LinkQuadrature integrate_link(const ShockDistribution& shocks, double cost,
                              const UtilityParams& params, const LinkQuadratureOptions& opts) {
    if (!std::isfinite(cost)) throw InvalidArgument("cost must be finite");
    LinkQuadrature out;
    const double k = 1.0 - params.beta_cost * cost;
    if (k <= 0.0) return out;
    const double r = params.surplus_exponent();
    const double q = params.duration_exponent();

    if (auto* pm = shocks.as_point_mass()) {
        out.value.utility = surplus_at(pm->value, k, params, r);
        out.value.duration = duration_at(pm->value, k, params, q);
        return out;
    }

    const LogNormalShock& ln = *shocks.as_lognormal();
    double z_lo = kLowestZ;
    if (params.alpha > 0.0)
        z_lo = std::max(z_lo, (std::log(params.alpha / k) - ln.location) / ln.scale);

    QuadratureOptions qopts{opts.abs_tol, opts.rel_tol, opts.max_panels};
    auto util = [&](double z) {
        const double eps = std::exp(ln.location + ln.scale * z);
        return surplus_at(eps, k, params, r) * standard_normal_pdf(z);
    };
    auto dur = [&](double z) {
        const double eps = std::exp(ln.location + ln.scale * z);
        return duration_at(eps, k, params, q) * standard_normal_pdf(z);
    };
    QuadratureResult u = integrate_standardized(util, z_lo, (r - 1.0) * ln.scale, opts.upper_tail, qopts);
    QuadratureResult d = integrate_standardized(dur, z_lo, q * ln.scale, opts.upper_tail, qopts);
    out.value = {u.value, d.value};
    out.utility_error = u.error;
    out.duration_error = d.error;
    out.converged = u.converged && d.converged;
    return out;
}

double expected_link_utility(const Link& link, double price, double phi_caller, double phi_callee,
                             const UtilityParams& params, const LinkQuadratureOptions& opts) {
    if (!(phi_caller >= 0.0 && phi_caller <= 1.0 && phi_callee >= 0.0 && phi_callee <= 1.0))
        throw InvalidArgument("coverage fractions must lie in [0,1]");
    const double cost = CallCost::make(price, params.beta_coverage, phi_caller, phi_callee).total();
    LinkQuadrature res = integrate_link(link.shocks, cost, params, opts);
    if (!res.converged)
        throw QuadratureError("link utility quadrature did not converge", res.value.utility,
                              res.utility_error);
    return res.value.utility;
}

// ---------------------------------------------------------------------------

LinkValueEngine::LinkValueEngine(const UtilityParams& params, double grid_step)
    : params_(params), step_(grid_step) {
    params_.validate();
    if (!(grid_step > 0.0)) throw InvalidArgument("grid step must be > 0");
}

LinkValueEngine LinkValueEngine::for_shocks(const UtilityParams& params,
                                            std::span<const ShockDistribution> shocks,
                                            double min_cost, double max_cost, double grid_step) {
    LinkValueEngine engine(params, grid_step);
    if (params.alpha <= 0.0) return engine;
    const double k_hi = 1.0 - params.beta_cost * min_cost;
    if (k_hi <= 0.0) return engine;
    const double k_lo = std::max(1.0 - params.beta_cost * max_cost, 1e-6 * k_hi);

    struct Range {
        double sigma, lo, hi;
    };
    std::vector<Range> ranges;
    for (const auto& s : shocks) {
        const auto* ln = s.as_lognormal();
        if (!ln) continue;
        auto it = std::find_if(ranges.begin(), ranges.end(),
                               [&](const Range& r) { return r.sigma == ln->scale; });
        if (it == ranges.end()) {
            ranges.push_back({ln->scale, ln->location, ln->location});
        } else {
            it->lo = std::min(it->lo, ln->location);
            it->hi = std::max(it->hi, ln->location);
        }
        // Many distinct scales would defeat the purpose; leave those to quadrature.
        if (ranges.size() > 64) break;
    }
    for (const Range& r : ranges) {
        const double m_lo = r.lo + std::log(k_lo / params.alpha);
        const double m_hi = r.hi + std::log(k_hi / params.alpha);
        engine.prepare(r.sigma, m_lo, m_hi);
    }
    return engine;
}

void LinkValueEngine::prepare(double sigma, double m_lo, double m_hi) {
    if (params_.alpha <= 0.0) return;
    // Below this the moments are far beneath any tolerance; quadrature handles them.
    m_lo = std::max(m_lo, -20.0 * sigma);
    if (m_hi < m_lo) m_hi = m_lo;
    const double m0 = m_lo - 2.0 * step_;
    const auto n = static_cast<std::size_t>(std::ceil((m_hi - m_lo) / step_)) + 5;

    Table t{sigma, m0, std::vector<double>(n), std::vector<double>(n)};
    const double r = params_.surplus_exponent();
    const double q = params_.duration_exponent();
    const QuadratureOptions tight{0.0, 1e-13, 4000};
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < n; ++i) {
        const double m = m0 + static_cast<double>(i) * step_;
        t.log_g[i] = std::log(shifted_power_moment(m, sigma, r, 1, tight).value);
        t.log_h[i] = std::log(shifted_power_moment(m, sigma, q, 0, tight).value);
    }
    auto it = std::find_if(tables_.begin(), tables_.end(),
                           [&](const Table& x) { return x.sigma == sigma; });
    if (it != tables_.end())
        *it = std::move(t);
    else
        tables_.push_back(std::move(t));
}

const LinkValueEngine::Table* LinkValueEngine::find(double sigma) const {
    for (const auto& t : tables_)
        if (t.sigma == sigma) return &t;
    return nullptr;
}

bool LinkValueEngine::lookup(const std::vector<double>& logs, double m0, double step, double m,
                             double& out) {
    const double pos = (m - m0) / step;
    const double fl = std::floor(pos);
    if (!(fl >= 1.0) || fl + 2.0 >= static_cast<double>(logs.size())) return false;
    const auto i = static_cast<std::size_t>(fl);
    const double t = pos - fl;
    const double a = logs[i - 1], b = logs[i], c = logs[i + 1], d = logs[i + 2];
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(d))
        return false;
    const double wa = -t * (t - 1.0) * (t - 2.0) / 6.0;
    const double wb = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    const double wc = -(t + 1.0) * t * (t - 2.0) / 2.0;
    const double wd = (t + 1.0) * t * (t - 1.0) / 6.0;
    out = std::exp(wa * a + wb * b + wc * c + wd * d);
    return true;
}

LinkExpectation LinkValueEngine::evaluate(const ShockDistribution& shocks, double cost) const {
    const UtilityParams& p = params_;
    const double k = 1.0 - p.beta_cost * cost;
    if (k <= 0.0) return {};
    const double r = p.surplus_exponent();
    const double q = p.duration_exponent();

    if (auto* pm = shocks.as_point_mass())
        return {surplus_at(pm->value, k, p, r), duration_at(pm->value, k, p, q)};

    const LogNormalShock& ln = *shocks.as_lognormal();
    const double coef = (p.gamma - 1.0) / (p.beta_cost * p.gamma);
    if (p.alpha <= 0.0) {
        // E[eps^s] = exp(s*mu + s^2 sigma^2 / 2)
        const double s2 = ln.scale * ln.scale;
        const double eu = coef * std::pow(k, r) *
                          std::exp((r - 1.0) * ln.location + 0.5 * (r - 1.0) * (r - 1.0) * s2);
        const double ed = std::pow(k, q) * std::exp(q * ln.location + 0.5 * q * q * s2);
        return {eu, ed};
    }

    if (const Table* t = find(ln.scale)) {
        const double m = ln.location + std::log(k / p.alpha);
        double g = 0.0, h = 0.0;
        if (lookup(t->log_g, t->m0, step_, m, g) && lookup(t->log_h, t->m0, step_, m, h))
            return {coef * std::pow(p.alpha, r - 1.0) * k * g, std::pow(p.alpha, q) * h};
    }
    LinkQuadrature direct = integrate_link(shocks, cost, p);
    return direct.value;
}

}  // namespace netsub
