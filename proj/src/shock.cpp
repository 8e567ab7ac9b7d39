#include "netsub/shock.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "netsub/types.hpp"

namespace netsub {

namespace {

void check_lognormal(const LogNormalShock& s) {
    if (!std::isfinite(s.location) || !std::isfinite(s.scale) || s.scale <= 0.0)
        throw InvalidArgument("log-normal shock needs finite location and scale > 0");
}

}  // namespace

double standard_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double standard_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal quantile needs p in (0,1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

ShockDistribution::ShockDistribution(LogNormalShock s) : family_(s) { check_lognormal(s); }

ShockDistribution::ShockDistribution(PointMassShock s) : family_(s) {
    if (!std::isfinite(s.value) || s.value <= 0.0)
        throw InvalidArgument("point-mass shock must be finite and > 0");
}

std::string ShockDistribution::family_name() const {
    return as_lognormal() ? "lognormal" : "point";
}

double ShockDistribution::cdf(double eps) const {
    if (auto* ln = as_lognormal()) {
        if (eps <= 0.0) return 0.0;
        return standard_normal_cdf((std::log(eps) - ln->location) / ln->scale);
    }
    return eps >= std::get<PointMassShock>(family_).value ? 1.0 : 0.0;
}

double ShockDistribution::pdf(double eps) const {
    if (auto* ln = as_lognormal()) {
        if (eps <= 0.0) return 0.0;
        const double z = (std::log(eps) - ln->location) / ln->scale;
        return standard_normal_pdf(z) / (eps * ln->scale);
    }
    return 0.0;
}

double ShockDistribution::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile needs p in (0,1)");
    if (auto* ln = as_lognormal())
        return std::exp(ln->location + ln->scale * standard_normal_quantile(p));
    return std::get<PointMassShock>(family_).value;
}

double ShockDistribution::mean() const {
    if (auto* ln = as_lognormal())
        return std::exp(ln->location + 0.5 * ln->scale * ln->scale);
    return std::get<PointMassShock>(family_).value;
}

bool ShockDistribution::operator==(const ShockDistribution& o) const {
    if (auto* a = as_lognormal()) {
        auto* b = o.as_lognormal();
        return b && a->location == b->location && a->scale == b->scale;
    }
    auto* b = o.as_point_mass();
    return b && b->value == std::get<PointMassShock>(family_).value;
}

}  // namespace netsub
