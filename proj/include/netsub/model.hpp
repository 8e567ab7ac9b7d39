#pragma once

// Per-shock usage model and expected per-link values.
//
// Given shock eps and per-second cost c, a caller picks monthly duration d to
// maximize (1/beta_cost) * [d - (d^gamma/gamma + alpha*d) / eps] - c*d.
// With k = 1 - beta_cost*c the optimum is
//     d* = max(0, eps*k - alpha)^(1/(gamma-1))
// and the resulting surplus simplifies to
//     S = (gamma-1)/(beta_cost*gamma) * (eps*k - alpha)^(gamma/(gamma-1)) / eps.

#include <cstddef>
#include <span>
#include <vector>

#include "netsub/quadrature.hpp"
#include "netsub/shock.hpp"
#include "netsub/types.hpp"

namespace netsub {

struct UtilityParams {
    double gamma = 2.0;          // curvature, > 1
    double alpha = 1.0;          // censoring intercept, >= 0
    double beta_cost = 1.0;      // utility per dollar, > 0
    double beta_coverage = 0.0;  // dollars per second, sign left to configuration
    double delta = 1.0;          // monthly discount factor, (0, 1]

    void validate() const;
    /// gamma / (gamma - 1): growth exponent of the surplus in the shock.
    double surplus_exponent() const { return gamma / (gamma - 1.0); }
    /// 1 / (gamma - 1): growth exponent of the optimal duration.
    double duration_exponent() const { return 1.0 / (gamma - 1.0); }
};

/// Converts an annual discount factor to the per-month factor.
double monthly_discount(double annual);

struct CallCost {
    double price = 0.0;   // dollars / second
    double hassle = 0.0;  // beta_coverage * phi_i * phi_j
    double total() const { return price + hassle; }

    static CallCost make(double price, double beta_coverage, double phi_caller, double phi_callee) {
        return {price, beta_coverage * phi_caller * phi_callee};
    }
};

struct Link {
    AgentId caller = 0;
    AgentId callee = 0;
    ShockDistribution shocks;
};

/// Shock level at or below which the caller places no call (inf if never).
double censoring_threshold(double cost, const UtilityParams& params);

double optimal_duration(double epsilon, double cost, const UtilityParams& params);
double call_surplus(double epsilon, double cost, const UtilityParams& params);

struct LinkQuadratureOptions {
    double abs_tol = 1e-8;
    double rel_tol = 0.0;
    /// Integration starts with the quantile at 1 - upper_tail and keeps adding
    /// unit panels (in standardized log-shock units) while they still contribute.
    double upper_tail = 1e-6;
    std::size_t max_panels = 4000;
};

struct LinkExpectation {
    double utility = 0.0;   // E[S], dollars per month
    double duration = 0.0;  // E[d*], seconds per month
};

struct LinkQuadrature {
    LinkExpectation value;
    double utility_error = 0.0;
    double duration_error = 0.0;
    bool converged = true;
};

/// Expected surplus and duration of one link-month by direct quadrature.
LinkQuadrature integrate_link(const ShockDistribution& shocks, double cost,
                              const UtilityParams& params, const LinkQuadratureOptions& opts = {});

/// Eu_ij(p_t, phi_t). Throws QuadratureError when the tolerance is not met.
double expected_link_utility(const Link& link, double price, double phi_caller, double phi_callee,
                             const UtilityParams& params, const LinkQuadratureOptions& opts = {});

/// E[(W - 1)_+^power / W^inverse_w] for ln W ~ N(m, sigma^2).
QuadratureResult shifted_power_moment(double m, double sigma, double power, int inverse_w,
                                      const QuadratureOptions& opts, double upper_tail = 1e-6);

/// Fast evaluator of expected link values used by the equilibrium solver.
///
/// For log-normal shocks with alpha > 0, substituting eps = (alpha/k) W gives
///   E[S]  = (gamma-1)/(beta_cost*gamma) * alpha^(r-1) * k * G(m),  G(m) = E[(W-1)_+^r / W]
///   E[d*] = alpha^q * H(m),                                       H(m) = E[(W-1)_+^q]
/// with m = mu + ln(k/alpha) and ln W ~ N(m, sigma^2). G and H depend on m
/// alone for a given sigma, so they are tabulated once (log values, 4-point
/// Lagrange interpolation). alpha = 0 has closed-form moments. Anything the
/// tables do not cover falls back to direct quadrature.
class LinkValueEngine {
public:
    explicit LinkValueEngine(const UtilityParams& params, double grid_step = 0.005);

    /// Builds tables covering every link's shifted location for costs in
    /// [min_cost, max_cost].
    static LinkValueEngine for_shocks(const UtilityParams& params,
                                      std::span<const ShockDistribution> shocks, double min_cost,
                                      double max_cost, double grid_step = 0.005);

    void prepare(double sigma, double m_lo, double m_hi);
    LinkExpectation evaluate(const ShockDistribution& shocks, double cost) const;
    const UtilityParams& params() const { return params_; }
    std::size_t table_count() const { return tables_.size(); }

private:
    struct Table {
        double sigma;
        double m0;
        std::vector<double> log_g;
        std::vector<double> log_h;
    };

    const Table* find(double sigma) const;
    static bool lookup(const std::vector<double>& logs, double m0, double step, double m,
                       double& out);

    UtilityParams params_;
    double step_;
    std::vector<Table> tables_;
};

}  // namespace netsub
