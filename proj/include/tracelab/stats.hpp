#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

namespace tracelab::stats {

/// Long-format observations: one row per (task, unit) with named numeric
/// columns. task_id doubles as the fixed-effect group and default cluster.
struct PanelDataset {
    std::vector<std::string> task_id;
    std::vector<std::string> unit_id;
    std::unordered_map<std::string, std::vector<double>> numeric;

    std::size_t rows() const { return task_id.size(); }

    const std::vector<double>& column(const std::string& name) const {
        auto it = numeric.find(name);
        if (it == numeric.end()) throw std::out_of_range("panel has no column: " + name);
        if (it->second.size() != rows())
            throw std::logic_error("panel column " + name + " has wrong length");
        return it->second;
    }

    const std::vector<std::string>& id_column(const std::string& name) const {
        if (name == "task_id") return task_id;
        if (name == "unit_id") return unit_id;
        throw std::out_of_range("unknown id column: " + name);
    }
};

/// Group rows by id value, first-appearance order.
inline std::vector<std::vector<std::size_t>> group_rows(const std::vector<std::string>& ids) {
    std::unordered_map<std::string, std::size_t> index;
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < ids.size(); ++r) {
        auto [it, inserted] = index.emplace(ids[r], groups.size());
        if (inserted) groups.emplace_back();
        groups[it->second].push_back(r);
    }
    return groups;
}

/// Subtract the group mean from each entry, in place.
inline void demean_within(std::vector<double>& values,
                          const std::vector<std::vector<std::size_t>>& groups) {
    for (const auto& g : groups) {
        double mean = 0.0;
        for (std::size_t r : g) mean += values[r];
        mean /= static_cast<double>(g.size());
        for (std::size_t r : g) values[r] -= mean;
    }
}

struct CoefStat {
    std::string term;
    double estimate = 0.0;
    double se = 0.0;
    double t = 0.0;
    double df = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p = 1.0;
};

struct FeFit {
    std::vector<CoefStat> coefficients;
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    std::size_t n_fe_groups = 0;
    Eigen::MatrixXd vcov;  // cluster-robust, CR1-scaled
};

/// Linear probability model with per-task intercepts absorbed by within-task
/// demeaning. Standard errors are cluster-robust (sandwich with the
/// G/(G-1) x (N-1)/(N-K) small-sample factor, K counting the absorbed
/// intercepts), df = clusters - 1.
inline FeFit fe_lpm(const PanelDataset& data, const std::string& outcome,
                    const std::vector<std::string>& regressors,
                    const std::string& fe_var = "task_id",
                    const std::string& cluster_var = "task_id") {
    const std::size_t n = data.rows();
    const std::size_t k = regressors.size();
    if (n == 0) throw std::invalid_argument("fe_lpm: empty panel");
    if (k == 0) throw std::invalid_argument("fe_lpm: no regressors");

    auto fe_groups = group_rows(data.id_column(fe_var));
    auto clusters = group_rows(data.id_column(cluster_var));
    if (clusters.size() < 2) throw std::invalid_argument("fe_lpm: needs at least 2 clusters");

    std::vector<double> y = data.column(outcome);
    for (double v : y)
        if (!std::isfinite(v)) throw std::invalid_argument("fe_lpm: non-finite outcome");
    demean_within(y, fe_groups);

    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> col = data.column(regressors[j]);
        demean_within(col, fe_groups);
        double max_abs = 0.0;
        for (double v : col) max_abs = std::max(max_abs, std::fabs(v));
        if (max_abs < 1e-12)
            throw std::invalid_argument("fe_lpm: regressor " + regressors[j] +
                                        " is constant within every task");
        for (std::size_t r = 0; r < n; ++r)
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = col[r];
    }
    Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) yv(static_cast<Eigen::Index>(r)) = y[r];

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(k)) {
        // the columns permuted past the numerical rank are the collinear ones
        auto perm = qr.colsPermutation().indices();
        std::string culprit = regressors[static_cast<std::size_t>(perm(static_cast<Eigen::Index>(k) - 1))];
        throw std::invalid_argument("fe_lpm: perfect collinearity after demeaning involving " +
                                    culprit);
    }
    Eigen::VectorXd beta = qr.solve(yv);
    Eigen::VectorXd resid = yv - X * beta;

    const double G = static_cast<double>(clusters.size());
    const double N = static_cast<double>(n);
    const double K_total = static_cast<double>(k + fe_groups.size());
    if (N <= K_total)
        throw std::invalid_argument("fe_lpm: not enough observations for the absorbed design");

    Eigen::MatrixXd xtx_inv =
        (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(
            static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                                 static_cast<Eigen::Index>(k));
    for (const auto& g : clusters) {
        Eigen::VectorXd score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
        for (std::size_t r : g)
            score += X.row(static_cast<Eigen::Index>(r)).transpose() *
                     resid(static_cast<Eigen::Index>(r));
        meat += score * score.transpose();
    }
    const double cr1 = (G / (G - 1.0)) * ((N - 1.0) / (N - K_total));
    Eigen::MatrixXd vcov = cr1 * xtx_inv * meat * xtx_inv;

    FeFit fit;
    fit.n_obs = n;
    fit.n_clusters = clusters.size();
    fit.n_fe_groups = fe_groups.size();
    fit.vcov = vcov;
    const double df = G - 1.0;
    boost::math::students_t_distribution<double> tdist(df);
    const double tcrit = boost::math::quantile(tdist, 0.975);
    for (std::size_t j = 0; j < k; ++j) {
        CoefStat c;
        c.term = regressors[j];
        c.estimate = beta(static_cast<Eigen::Index>(j));
        c.se = std::sqrt(std::max(0.0, vcov(static_cast<Eigen::Index>(j),
                                            static_cast<Eigen::Index>(j))));
        c.df = df;
        c.t = c.se > 0 ? c.estimate / c.se : std::numeric_limits<double>::infinity();
        c.ci_low = c.estimate - tcrit * c.se;
        c.ci_high = c.estimate + tcrit * c.se;
        c.p = c.se > 0 ? 2.0 * boost::math::cdf(boost::math::complement(tdist, std::fabs(c.t)))
                       : 0.0;
        fit.coefficients.push_back(std::move(c));
    }
    return fit;
}

/// Average ranks for ties.
inline std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = avg;
        i = j + 1;
    }
    return ranks;
}

struct SpearmanResult {
    double rho = 0.0;
    double z = 0.0;  // Fisher transform, atanh(rho) * sqrt(n - 3)
    double p = 1.0;  // two-sided, normal reference
};

inline SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    const std::size_t n = x.size();
    if (n < 4) throw std::invalid_argument("spearman: needs n >= 4");
    auto rx = average_ranks(x);
    auto ry = average_ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i] / static_cast<double>(n);
        my += ry[i] / static_cast<double>(n);
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0 || syy <= 0)
        throw std::invalid_argument("spearman: correlation undefined for a constant vector");
    SpearmanResult out;
    out.rho = sxy / std::sqrt(sxx * syy);
    out.rho = std::clamp(out.rho, -1.0, 1.0);
    if (std::fabs(out.rho) >= 1.0) {
        out.z = out.rho > 0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
        out.p = 0.0;
    } else {
        out.z = std::atanh(out.rho) * std::sqrt(static_cast<double>(n) - 3.0);
        out.p = std::erfc(std::fabs(out.z) / std::sqrt(2.0));
    }
    return out;
}

/// Two-way mixed, consistency, single rater: (BMS - EMS) / (BMS + (k-1) EMS)
/// from the targets x raters ANOVA decomposition.
inline double icc31(const std::vector<std::vector<double>>& ratings) {
    const std::size_t n = ratings.size();
    if (n < 2) throw std::invalid_argument("icc31: needs at least 2 targets");
    const std::size_t k = ratings.front().size();
    if (k < 2) throw std::invalid_argument("icc31: needs at least 2 raters");
    for (const auto& row : ratings)
        if (row.size() != k) throw std::invalid_argument("icc31: ragged ratings matrix");

    double grand = 0.0;
    for (const auto& row : ratings)
        for (double v : row) grand += v;
    grand /= static_cast<double>(n * k);

    double ss_rows = 0.0, ss_cols = 0.0, ss_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_mean = 0.0;
        for (double v : ratings[i]) row_mean += v;
        row_mean /= static_cast<double>(k);
        ss_rows += static_cast<double>(k) * (row_mean - grand) * (row_mean - grand);
    }
    for (std::size_t j = 0; j < k; ++j) {
        double col_mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) col_mean += ratings[i][j];
        col_mean /= static_cast<double>(n);
        ss_cols += static_cast<double>(n) * (col_mean - grand) * (col_mean - grand);
    }
    for (const auto& row : ratings)
        for (double v : row) ss_total += (v - grand) * (v - grand);
    double ss_err = ss_total - ss_rows - ss_cols;

    if (ss_rows < 1e-12)
        throw std::domain_error("icc31: zero between-target variance, agreement undefined");
    double bms = ss_rows / static_cast<double>(n - 1);
    double ems = std::max(0.0, ss_err) / static_cast<double>((n - 1) * (k - 1));
    return (bms - ems) / (bms + static_cast<double>(k - 1) * ems);
}

}  // namespace tracelab::stats
