#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "plap/errors.hpp"
#include "plap/extended_real.hpp"

namespace plap {

/// Unvalidated (p, n, q, r) tuple. Used where inadmissible points must be
/// classified rather than rejected (compatibility reports, region scans).
struct RawParams {
    double p = 2.0;
    int n = 1;
    ExtendedReal q = infinity;
    ExtendedReal r = infinity;
};

/// Validated problem parameters. All exponent formulas read from here.
class ProblemParams {
public:
    /// Builds and validates. alpha_H may be omitted only when p == 2, where it
    /// defaults to 1 (the heat equation is smooth).
    static ProblemParams make(double p, int n, ExtendedReal q, ExtendedReal r,
                              std::optional<double> alpha_H = std::nullopt) {
        if (n < 1) throw DomainError("ProblemParams: n must be a positive integer");
        const double p_min = std::max(1.0, 2.0 * n / (n + 2.0));
        if (!(p > p_min)) {
            std::ostringstream os;
            os << "ProblemParams: p=" << p << " must exceed max{1, 2n/(n+2)}=" << p_min;
            throw DomainError(os.str());
        }
        if (!q.greater_than(n)) throw DomainError("ProblemParams: q must exceed n");
        if (!r.greater_than(2.0)) throw DomainError("ProblemParams: r must exceed 2");
        if (!alpha_H) {
            if (p != 2.0) {
                throw DomainError("ProblemParams: alpha_H must be supplied when p != 2");
            }
            alpha_H = 1.0;
        }
        if (!(*alpha_H > 0.0 && *alpha_H <= 1.0)) {
            throw DomainError("ProblemParams: alpha_H must lie in (0, 1]");
        }
        return ProblemParams(p, n, q, r, *alpha_H);
    }

    double p() const noexcept { return p_; }
    int n() const noexcept { return n_; }
    const ExtendedReal& q() const noexcept { return q_; }
    const ExtendedReal& r() const noexcept { return r_; }
    double alpha_H() const noexcept { return alpha_H_; }

    double n_over_q() const noexcept { return q_.divide(n_); }
    double inv_r() const noexcept { return r_.reciprocal(); }
    /// n/q + 2/r
    double holder_band() const noexcept { return n_over_q() + 2.0 * inv_r(); }

    RawParams raw() const { return RawParams{p_, n_, q_, r_}; }

    ProblemParams with_integrability(ExtendedReal q, ExtendedReal r) const {
        return make(p_, n_, q, r, alpha_H_);
    }

private:
    ProblemParams(double p, int n, ExtendedReal q, ExtendedReal r, double alpha_H)
        : p_(p), n_(n), q_(q), r_(r), alpha_H_(alpha_H) {}

    double p_;
    int n_;
    ExtendedReal q_;
    ExtendedReal r_;
    double alpha_H_;
};

namespace violation {
inline constexpr const char* p_range = "p>max{1,2n/(n+2)}";
inline constexpr const char* q_gt_n = "q>n";
inline constexpr const char* r_gt_2 = "r>2";
inline constexpr const char* minimal = "1/r+n/(pq)<1";
inline constexpr const char* holder = "n/q+2/r<1";
inline constexpr const char* lower = "max{0;(1-1/r)(2-p)}<=n/q+2/r";
}  // namespace violation

struct CompatibilityReport {
    bool admissible = false;
    double minimal_integrability = 0.0;  // 1/r + n/(pq)
    double holder_band = 0.0;            // n/q + 2/r
    double lower_band = 0.0;             // max{0, (1-1/r)(2-p)}
    std::vector<std::string> violations;

    std::string violation_list(char sep = '|') const {
        std::string out;
        for (const auto& v : violations) {
            if (!out.empty()) out += sep;
            out += v;
        }
        return out;
    }
};

inline CompatibilityReport check_compatibility(const RawParams& raw) {
    CompatibilityReport rep;
    const double n = raw.n;
    const double inv_r = raw.r.reciprocal();
    const double n_over_q = raw.q.divide(n);
    rep.minimal_integrability = inv_r + n_over_q / raw.p;
    rep.holder_band = n_over_q + 2.0 * inv_r;
    rep.lower_band = std::max(0.0, (1.0 - inv_r) * (2.0 - raw.p));

    if (!(raw.p > std::max(1.0, 2.0 * n / (n + 2.0)))) rep.violations.emplace_back(violation::p_range);
    if (!raw.q.greater_than(n)) rep.violations.emplace_back(violation::q_gt_n);
    if (!raw.r.greater_than(2.0)) rep.violations.emplace_back(violation::r_gt_2);
    if (!(rep.minimal_integrability < 1.0)) rep.violations.emplace_back(violation::minimal);
    if (!(rep.holder_band < 1.0)) rep.violations.emplace_back(violation::holder);
    if (!(rep.lower_band <= rep.holder_band)) rep.violations.emplace_back(violation::lower);
    rep.admissible = rep.violations.empty();
    return rep;
}

inline CompatibilityReport check_compatibility(const ProblemParams& params) {
    return check_compatibility(params.raw());
}

/// Exponents derived from admissible parameters.
///
/// sigma is the temporal correction of the degenerate cylinders. It is taken
/// as max{1, 2/(2+(2-p)alpha_hat)}: equal to 1 for p <= 2 and above 1 for
/// p > 2, so corrected cylinders coincide with the intrinsic ones in the
/// singular range, are strictly shallower in the degenerate range, and
/// sigma * theta >= 2 whenever theta obeys its bracket.
struct ExponentSet {
    double alpha_hat = 0.0;
    double alpha = 0.0;
    bool attained_by_homogeneous = false;
    double sigma = 1.0;
    double gamma = 2.0;
    double beta_star = 0.0;
    double denominator = 0.0;           // (p-1)(1-1/r) + 1/r
    double denominator_expanded = 0.0;  // p[1-(n/(pq)+1/r)] - [1-(n/q+2/r)]

    /// alpha for callers that need the open endpoint alpha_H^- strictly.
    double alpha_strict(double margin = 1e-6) const noexcept {
        return attained_by_homogeneous ? alpha - margin : alpha;
    }
};

inline void require_admissible(const ProblemParams& params, const char* who) {
    const auto rep = check_compatibility(params);
    if (!rep.admissible) {
        throw DomainError(std::string(who) + ": parameters violate " + rep.violation_list());
    }
}

inline ExponentSet sharp_exponents(const ProblemParams& params) {
    require_admissible(params, "sharp_exponents");
    const double p = params.p();
    const double inv_r = params.inv_r();
    const double numerator = 1.0 - params.holder_band();

    ExponentSet e;
    e.denominator = (p - 1.0) * (1.0 - inv_r) + inv_r;
    e.denominator_expanded = p * (1.0 - (params.n_over_q() / p + inv_r)) - numerator;
    if (std::abs(e.denominator - e.denominator_expanded) > 1e-12 * std::max(1.0, e.denominator)) {
        throw std::logic_error("sharp_exponents: denominator identity violated");
    }
    e.alpha_hat = numerator / e.denominator;
    e.attained_by_homogeneous = params.alpha_H() <= e.alpha_hat;
    e.alpha = std::min(e.alpha_hat, params.alpha_H());
    e.sigma = std::max(1.0, 2.0 / (2.0 + (2.0 - p) * e.alpha_hat));
    e.gamma = 2.0 + e.alpha * (2.0 - p);
    e.beta_star = numerator;
    return e;
}

namespace detail {

inline void check_base(double base) {
    if (!(base > 0.0 && base < 1.0)) {
        throw DomainError("theta: base must lie in (0, 1)");
    }
}

}  // namespace detail

/// 2 + (2-p) log_base(accumulated). `accumulated` is base^alpha + |grad u|
/// in the single-scale form, or the iterated sum of the dyadic argument.
inline double theta_from_sum(double p, double accumulated, double base) {
    detail::check_base(base);
    if (!(accumulated > 0.0)) throw DomainError("theta: accumulated sum must be positive");
    return 2.0 + (2.0 - p) * std::log(accumulated) / std::log(base);
}

/// Intrinsic time exponent at a point with gradient magnitude grad_mag, with
/// the sharp alpha of `params`.
inline double theta(const ProblemParams& params, double grad_mag, double base) {
    detail::check_base(base);
    if (!(grad_mag >= 0.0)) throw DomainError("theta: grad_mag must be nonnegative");
    const double alpha = sharp_exponents(params).alpha;
    return theta_from_sum(params.p(), std::pow(base, alpha) + grad_mag, base);
}

/// lambda^{k alpha} + g * sum_{j<k} lambda^{j alpha}
inline double dyadic_gradient_sum(double alpha, double grad_mag, double lambda, int k) {
    double partial = 0.0;
    for (int j = 0; j < k; ++j) partial += std::pow(lambda, j * alpha);
    return std::pow(lambda, k * alpha) + grad_mag * partial;
}

/// Per-step exponent of the dyadic iteration: base lambda^k and the
/// accumulated gradient sum in place of base^alpha + g.
inline double theta_dyadic_step(const ProblemParams& params, double grad_mag, double lambda, int k) {
    if (k < 1) throw DomainError("theta_dyadic_step: k must be >= 1");
    detail::check_base(lambda);
    const double alpha = sharp_exponents(params).alpha;
    return theta_from_sum(params.p(), dyadic_gradient_sum(alpha, grad_mag, lambda, k),
                          std::pow(lambda, k));
}

struct ThetaBounds {
    double lower = 2.0;
    double upper = 2.0;
    /// For p > 2: (1+2/(p-2)+n/q) / (1-1/r+1/(p-2)); empty otherwise.
    std::optional<double> degenerate_closed_form;
};

inline ThetaBounds theta_bounds(const ProblemParams& params) {
    const auto e = sharp_exponents(params);
    const double p = params.p();
    const double shifted = 2.0 + (2.0 - p) * e.alpha_hat;
    ThetaBounds b{std::min(2.0, shifted), std::max(2.0, shifted), std::nullopt};
    if (p > 2.0) {
        const double m = 1.0 / (p - 2.0);
        const double closed = (1.0 + 2.0 * m + params.n_over_q()) / (1.0 - params.inv_r() + m);
        if (std::abs(closed - b.lower) > 1e-12 * std::max(1.0, std::abs(closed))) {
            throw std::logic_error("theta_bounds: closed form disagrees with 2+(2-p)alpha_hat");
        }
        b.degenerate_closed_form = closed;
    }
    return b;
}

struct KappaMu {
    double kappa = 0.0;             // (2p-1)s - (sn/q + (2p-1)s/r)
    double kappa_rearranged = 0.0;  // s[(p-1)(1-1/r)+1/r] + sp[1-(n/(pq)+1/r)]; exceeds kappa by s/r
    double mu_max = 1.0;
};

/// (2p-1)s - (sn/q + (2p-1)s/r) for any (p, n, q, r), admissible or not.
inline double kappa_formula(const RawParams& raw, double s) {
    const double c = 2.0 * raw.p - 1.0;
    return c * s - (s * raw.q.divide(raw.n) + c * s * raw.r.reciprocal());
}

/// Normalization exponent and the largest admissible scale. Terms whose
/// denominator (sup_u or f_norm) vanishes impose no restriction.
inline KappaMu kappa_mu(const ProblemParams& params, double s, double delta, double sup_u,
                        double f_norm) {
    require_admissible(params, "kappa_mu");
    if (!(s > 0.0)) throw DomainError("kappa_mu: s must be positive");
    if (!(delta > 0.0)) throw DomainError("kappa_mu: delta must be positive");
    if (sup_u < 0.0 || f_norm < 0.0) throw DomainError("kappa_mu: norms must be nonnegative");

    const double p = params.p();
    const double inv_r = params.inv_r();
    KappaMu out;
    out.kappa = kappa_formula(params.raw(), s);
    out.kappa_rearranged = s * ((p - 1.0) * (1.0 - inv_r) + inv_r) +
                           s * p * (1.0 - (params.n_over_q() / p + inv_r));
    double mu = 1.0;
    if (sup_u > 0.0) mu = std::min(mu, std::pow(1.0 / sup_u, 1.0 / s));
    if (f_norm > 0.0) mu = std::min(mu, std::pow(delta / f_norm, 1.0 / out.kappa));
    out.mu_max = mu;
    return out;
}

enum class LayerBranch { degenerate, singular };

/// epsilon-layer construction near the borderline n/q+2/r = 1 (degenerate)
/// or near the lower band (singular). alpha_eps is always obtained by feeding
/// the constructed (q, r) through sharp_exponents.
struct LayerReport {
    LayerBranch branch = LayerBranch::degenerate;
    double s = 0.0;
    double eps = 0.0;
    double q = 0.0;
    double r = 0.0;
    double alpha_hat = 0.0;
    double alpha_eps = 0.0;
    /// Degenerate: 2eps / (2(p-1) - (p-2)(1-s)eps), capped by alpha_H.
    std::optional<double> closed_form;
    /// Degenerate: the pair n/(s(1-eps)), 2/((1-s)eps) as literally stated,
    /// and what substitution yields for it (absent when inadmissible).
    std::optional<double> stated_q;
    std::optional<double> stated_r;
    std::optional<double> stated_alpha;
    /// Singular: nr/((r-1)q) + 2/(r-1) - (2-p), which equals eps by construction.
    std::optional<double> varsigma;
};

inline LayerReport epsilon_layers(const ProblemParams& params, LayerBranch branch, double s,
                                  double eps) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("epsilon_layers: s must lie in (0, 1)");
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("epsilon_layers: eps must lie in (0, 1)");
    const double p = params.p();
    const double n = params.n();

    LayerReport rep;
    rep.branch = branch;
    rep.s = s;
    rep.eps = eps;

    if (branch == LayerBranch::degenerate) {
        // q = n/(s(1-eps)), r = 2/((1-s)(1-eps)) puts n/q + 2/r exactly at 1 - eps.
        rep.q = n / (s * (1.0 - eps));
        rep.r = 2.0 / ((1.0 - s) * (1.0 - eps));
        const double cf = 2.0 * eps / (2.0 * (p - 1.0) - (p - 2.0) * (1.0 - s) * eps);
        rep.closed_form = std::min(cf, params.alpha_H());
        rep.stated_q = n / (s * (1.0 - eps));
        rep.stated_r = 2.0 / ((1.0 - s) * eps);
        const RawParams stated{p, params.n(), *rep.stated_q, *rep.stated_r};
        if (check_compatibility(stated).admissible) {
            rep.stated_alpha =
                sharp_exponents(params.with_integrability(*rep.stated_q, *rep.stated_r)).alpha;
        }
    } else {
        const double p_min = std::max(1.0, 2.0 * n / (n + 2.0));
        if (!(p > p_min && p < 2.0)) {
            throw DomainError("epsilon_layers: singular branch needs max{1,2n/(n+2)} < p < 2");
        }
        const double lift = eps + 2.0 - p;
        rep.r = 2.0 / (s * lift) + 1.0;
        rep.q = n * rep.r / ((rep.r - 1.0) * (1.0 - s) * lift);
        rep.varsigma = n * rep.r / ((rep.r - 1.0) * rep.q) + 2.0 / (rep.r - 1.0) - (2.0 - p);
    }

    const RawParams built{p, params.n(), rep.q, rep.r};
    const auto compat = check_compatibility(built);
    if (!compat.admissible) {
        throw DomainError("epsilon_layers: constructed (q, r) violates " + compat.violation_list());
    }
    const auto e = sharp_exponents(params.with_integrability(rep.q, rep.r));
    rep.alpha_hat = e.alpha_hat;
    rep.alpha_eps = e.alpha;
    return rep;
}

struct RegionSample {
    double q = 0.0;
    double r = 0.0;
    CompatibilityReport report;
};

struct RegionScan {
    double p = 0.0;
    int n = 0;
    std::vector<RegionSample> samples;
    /// Level set n/q + 2/r = 1, as (q, r) pairs over the sampled q.
    std::vector<std::pair<double, double>> holder_curve;
    /// Level set (n/q + 2/r) / ((r-1)/r) = 2 - p; empty for p >= 2.
    std::vector<std::pair<double, double>> lower_curve;
};

/// Log-spaced scan of q in (n, q_max], r in (2, r_max].
inline RegionScan admissible_region(double p, int n, int resolution, double q_max = 0.0,
                                    double r_max = 200.0) {
    if (resolution < 2) throw DomainError("admissible_region: resolution must be >= 2");
    if (n < 1) throw DomainError("admissible_region: n must be positive");
    if (q_max <= 0.0) q_max = 100.0 * n;
    if (!(q_max > n) || !(r_max > 2.0)) {
        throw DomainError("admissible_region: need q_max > n and r_max > 2");
    }
    RegionScan scan;
    scan.p = p;
    scan.n = n;
    std::vector<double> qs;
    std::vector<double> rs;
    for (int i = 1; i <= resolution; ++i) {
        const double t = static_cast<double>(i) / resolution;
        qs.push_back(n * std::pow(q_max / n, t));
        rs.push_back(2.0 * std::pow(r_max / 2.0, t));
    }
    scan.samples.reserve(qs.size() * rs.size());
    for (double q : qs) {
        for (double r : rs) {
            scan.samples.push_back({q, r, check_compatibility(RawParams{p, n, q, r})});
        }
    }
    for (double q : qs) {
        const double nq = n / q;
        if (nq < 1.0) scan.holder_curve.emplace_back(q, 2.0 / (1.0 - nq));
        if (p < 2.0 && (2.0 - p) > nq) {
            const double r = (4.0 - p) / ((2.0 - p) - nq);
            if (r > 2.0) scan.lower_curve.emplace_back(q, r);
        }
    }
    return scan;
}

/// CSV with columns q, r, n_over_q_plus_2_over_r, admissible, violation.
inline std::string region_csv(const RegionScan& scan) {
    std::ostringstream os;
    os.precision(17);
    os << "q,r,n_over_q_plus_2_over_r,admissible,violation\n";
    for (const auto& s : scan.samples) {
        os << s.q << ',' << s.r << ',' << s.report.holder_band << ','
           << (s.report.admissible ? 1 : 0) << ',' << s.report.violation_list() << '\n';
    }
    return os.str();
}

}  // namespace plap
