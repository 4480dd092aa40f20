#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tracelab/stats.hpp"
#include "tracelab/util.hpp"

namespace tracelab::stats {

/// Recursive path system: one outcome equation over treatment, social and
/// cognitive mediators and controls; one equation per social mediator on the
/// treatment; one per cognitive mediator on treatment plus all social
/// mediators. Controls enter every equation so the in-sample decomposition
/// identity holds exactly. Task fixed effects are applied by demeaning every
/// variable first.
struct SemSpec {
    std::string treatment;
    std::vector<std::string> social;
    std::vector<std::string> cognitive;
    std::string outcome;
    std::vector<std::string> controls;
    int bootstrap_replicates = 1000;
    std::uint64_t seed = 0;
    double max_dropped_fraction = 0.10;
};

struct CompositeEstimate {
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

struct SemFit {
    // structural coefficient blocks
    std::vector<double> lambda;              // treatment -> social_k
    std::vector<double> delta;               // social_k -> outcome
    std::vector<double> phi;                 // treatment -> cognitive_c
    std::vector<double> theta;               // cognitive_c -> outcome
    std::vector<std::vector<double>> psi;    // [cognitive_c][social_k]
    double beta_direct = 0.0;                // treatment -> outcome, conditional
    std::vector<double> control_coefs;       // outcome-equation control coefficients

    // composite pathway effects (point estimates)
    double social = 0.0;             // sum_k delta_k lambda_k
    double cognitive = 0.0;          // sum_c phi_c theta_c
    double social_cognitive = 0.0;   // sum_k sum_c lambda_k psi_ck theta_c
    double social_cognitive_delta_variant = 0.0;  // literal delta_k psi_ck theta_c
    double direct = 0.0;
    double total_reduced_form = 0.0;  // treatment coefficient of Y ~ D + controls

    CompositeEstimate boot_social, boot_cognitive, boot_social_cognitive, boot_direct, boot_total;
    std::map<std::string, double> proportional_share;  // pathway / sum of pathways

    int replicates = 0;
    int dropped_replicates = 0;
};

namespace detail {

struct SingularDesign : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// OLS from a precomputed cross-product matrix: beta = M[xx]^{-1} M[xy].
inline Eigen::VectorXd ols_from_crossprod(const Eigen::MatrixXd& M,
                                          const std::vector<int>& x_idx, int y_idx) {
    const int k = static_cast<int>(x_idx.size());
    Eigen::MatrixXd xtx(k, k);
    Eigen::VectorXd xty(k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) xtx(i, j) = M(x_idx[static_cast<std::size_t>(i)],
                                                  x_idx[static_cast<std::size_t>(j)]);
        xty(i) = M(x_idx[static_cast<std::size_t>(i)], y_idx);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw SingularDesign("singular design in path equation");
    return qr.solve(xty);
}

struct PathEstimates {
    std::vector<double> lambda, delta, phi, theta;
    std::vector<std::vector<double>> psi;
    double beta_direct = 0.0;
    std::vector<double> control_coefs;
    double total_reduced_form = 0.0;
};

/// Variable layout inside the cross-product matrix:
/// [treatment | social.. | cognitive.. | controls.. | outcome]
struct Layout {
    int n_social = 0, n_cog = 0, n_controls = 0;
    int treatment() const { return 0; }
    int social(int k) const { return 1 + k; }
    int cognitive(int c) const { return 1 + n_social + c; }
    int control(int x) const { return 1 + n_social + n_cog + x; }
    int outcome() const { return 1 + n_social + n_cog + n_controls; }
    int dim() const { return outcome() + 1; }
};

inline PathEstimates estimate_paths(const Eigen::MatrixXd& M, const Layout& lay) {
    PathEstimates est;
    std::vector<int> controls_idx;
    for (int x = 0; x < lay.n_controls; ++x) controls_idx.push_back(lay.control(x));

    // outcome ~ treatment + social + cognitive + controls
    {
        std::vector<int> xs{lay.treatment()};
        for (int k = 0; k < lay.n_social; ++k) xs.push_back(lay.social(k));
        for (int c = 0; c < lay.n_cog; ++c) xs.push_back(lay.cognitive(c));
        for (int idx : controls_idx) xs.push_back(idx);
        Eigen::VectorXd beta = ols_from_crossprod(M, xs, lay.outcome());
        est.beta_direct = beta(0);
        est.delta.resize(static_cast<std::size_t>(lay.n_social));
        est.theta.resize(static_cast<std::size_t>(lay.n_cog));
        for (int k = 0; k < lay.n_social; ++k) est.delta[static_cast<std::size_t>(k)] = beta(1 + k);
        for (int c = 0; c < lay.n_cog; ++c)
            est.theta[static_cast<std::size_t>(c)] = beta(1 + lay.n_social + c);
        for (int x = 0; x < lay.n_controls; ++x)
            est.control_coefs.push_back(beta(1 + lay.n_social + lay.n_cog + x));
    }
    // social_k ~ treatment + controls
    est.lambda.resize(static_cast<std::size_t>(lay.n_social));
    for (int k = 0; k < lay.n_social; ++k) {
        std::vector<int> xs{lay.treatment()};
        for (int idx : controls_idx) xs.push_back(idx);
        est.lambda[static_cast<std::size_t>(k)] = ols_from_crossprod(M, xs, lay.social(k))(0);
    }
    // cognitive_c ~ treatment + social + controls
    est.phi.resize(static_cast<std::size_t>(lay.n_cog));
    est.psi.assign(static_cast<std::size_t>(lay.n_cog),
                   std::vector<double>(static_cast<std::size_t>(lay.n_social), 0.0));
    for (int c = 0; c < lay.n_cog; ++c) {
        std::vector<int> xs{lay.treatment()};
        for (int k = 0; k < lay.n_social; ++k) xs.push_back(lay.social(k));
        for (int idx : controls_idx) xs.push_back(idx);
        Eigen::VectorXd beta = ols_from_crossprod(M, xs, lay.cognitive(c));
        est.phi[static_cast<std::size_t>(c)] = beta(0);
        for (int k = 0; k < lay.n_social; ++k)
            est.psi[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)] = beta(1 + k);
    }
    // reduced form: outcome ~ treatment + controls
    {
        std::vector<int> xs{lay.treatment()};
        for (int idx : controls_idx) xs.push_back(idx);
        est.total_reduced_form = ols_from_crossprod(M, xs, lay.outcome())(0);
    }
    return est;
}

struct Composites {
    double social = 0.0, cognitive = 0.0, social_cognitive = 0.0, delta_variant = 0.0,
           direct = 0.0, total = 0.0;
};

inline Composites composites_of(const PathEstimates& est) {
    Composites c;
    for (std::size_t k = 0; k < est.lambda.size(); ++k) c.social += est.delta[k] * est.lambda[k];
    for (std::size_t g = 0; g < est.phi.size(); ++g) c.cognitive += est.phi[g] * est.theta[g];
    for (std::size_t k = 0; k < est.lambda.size(); ++k)
        for (std::size_t g = 0; g < est.phi.size(); ++g) {
            c.social_cognitive += est.lambda[k] * est.psi[g][k] * est.theta[g];
            c.delta_variant += est.delta[k] * est.psi[g][k] * est.theta[g];
        }
    c.direct = est.beta_direct;
    c.total = est.total_reduced_form;
    return c;
}

inline CompositeEstimate percentile_ci(double estimate, std::vector<double>& draws) {
    std::sort(draws.begin(), draws.end());
    CompositeEstimate out;
    out.estimate = estimate;
    out.ci_low = quantile_sorted(draws, 0.025);
    out.ci_high = quantile_sorted(draws, 0.975);
    return out;
}

}  // namespace detail

/// Least-squares estimation of the recursive path system with task fixed
/// effects removed by demeaning, plus composite pathway effects and a
/// cluster (task) bootstrap for their uncertainty. Replicates with singular
/// designs are dropped and counted; more than max_dropped_fraction dropped is
/// an error.
inline SemFit path_sem(const PanelDataset& data, const SemSpec& spec) {
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("path_sem: empty panel");

    detail::Layout lay;
    lay.n_social = static_cast<int>(spec.social.size());
    lay.n_cog = static_cast<int>(spec.cognitive.size());
    lay.n_controls = static_cast<int>(spec.controls.size());
    const int m = lay.dim();

    std::vector<const std::vector<double>*> vars;
    vars.push_back(&data.column(spec.treatment));
    for (const auto& s : spec.social) vars.push_back(&data.column(s));
    for (const auto& c : spec.cognitive) vars.push_back(&data.column(c));
    for (const auto& x : spec.controls) vars.push_back(&data.column(x));
    vars.push_back(&data.column(spec.outcome));

    auto groups = group_rows(data.task_id);
    const std::size_t G = groups.size();

    // demean every variable within task, then store per-cluster cross-products;
    // a resampled cluster's demeaned rows equal the original's, so the
    // bootstrap only re-sums these blocks
    std::vector<std::vector<double>> demeaned(static_cast<std::size_t>(m));
    for (int v = 0; v < m; ++v) {
        demeaned[static_cast<std::size_t>(v)] = *vars[static_cast<std::size_t>(v)];
        demean_within(demeaned[static_cast<std::size_t>(v)], groups);
    }
    std::vector<Eigen::MatrixXd> cluster_crossprod(G, Eigen::MatrixXd::Zero(m, m));
    for (std::size_t g = 0; g < G; ++g) {
        Eigen::MatrixXd Z(static_cast<Eigen::Index>(groups[g].size()), m);
        for (std::size_t i = 0; i < groups[g].size(); ++i)
            for (int v = 0; v < m; ++v)
                Z(static_cast<Eigen::Index>(i), v) =
                    demeaned[static_cast<std::size_t>(v)][groups[g][i]];
        cluster_crossprod[g] = Z.transpose() * Z;
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (const auto& block : cluster_crossprod) M += block;

    detail::PathEstimates est = detail::estimate_paths(M, lay);
    detail::Composites comp = detail::composites_of(est);

    SemFit fit;
    fit.lambda = est.lambda;
    fit.delta = est.delta;
    fit.phi = est.phi;
    fit.theta = est.theta;
    fit.psi = est.psi;
    fit.beta_direct = est.beta_direct;
    fit.control_coefs = est.control_coefs;
    fit.social = comp.social;
    fit.cognitive = comp.cognitive;
    fit.social_cognitive = comp.social_cognitive;
    fit.social_cognitive_delta_variant = comp.delta_variant;
    fit.direct = comp.direct;
    fit.total_reduced_form = comp.total;

    // nonparametric cluster bootstrap, replicate-indexed RNG
    std::vector<double> d_social, d_cog, d_soccog, d_direct, d_total;
    int dropped = 0;
    const int B = spec.bootstrap_replicates;
    for (int b = 0; b < B; ++b) {
        auto rng = indexed_rng(spec.seed, static_cast<std::uint64_t>(b));
        std::uniform_int_distribution<std::size_t> pick(0, G - 1);
        Eigen::MatrixXd Mb = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t g = 0; g < G; ++g) Mb += cluster_crossprod[pick(rng)];
        try {
            detail::Composites cb = detail::composites_of(detail::estimate_paths(Mb, lay));
            d_social.push_back(cb.social);
            d_cog.push_back(cb.cognitive);
            d_soccog.push_back(cb.social_cognitive);
            d_direct.push_back(cb.direct);
            d_total.push_back(cb.total);
        } catch (const detail::SingularDesign&) {
            ++dropped;
        }
    }
    fit.replicates = B;
    fit.dropped_replicates = dropped;
    if (B > 0) {
        if (static_cast<double>(dropped) > spec.max_dropped_fraction * static_cast<double>(B))
            throw std::runtime_error("path_sem: more than " +
                                     std::to_string(static_cast<int>(spec.max_dropped_fraction * 100)) +
                                     "% of bootstrap replicates were singular");
        fit.boot_social = detail::percentile_ci(comp.social, d_social);
        fit.boot_cognitive = detail::percentile_ci(comp.cognitive, d_cog);
        fit.boot_social_cognitive = detail::percentile_ci(comp.social_cognitive, d_soccog);
        fit.boot_direct = detail::percentile_ci(comp.direct, d_direct);
        fit.boot_total = detail::percentile_ci(comp.total, d_total);
    }

    double path_sum = comp.direct + comp.social + comp.cognitive + comp.social_cognitive;
    if (path_sum != 0.0) {
        fit.proportional_share["direct"] = comp.direct / path_sum;
        fit.proportional_share["social"] = comp.social / path_sum;
        fit.proportional_share["cognitive"] = comp.cognitive / path_sum;
        fit.proportional_share["social_cognitive"] = comp.social_cognitive / path_sum;
    }
    return fit;
}

}  // namespace tracelab::stats
