#pragma once

/**
 * @file detection.hpp
 *
 * @brief Threshold detection of a single deviating aggregator.
 *
 * Entry (i, j) of the difference matrix measures how far agent i's
 * second-iteration proposal for agent j lies from what j proposed for itself
 * in the first iteration. Benign agents produce similar entries; a deviator
 * stands out in its row. Size normalization divides out the natural scale
 * differences between large and small fleets.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "hours.hpp"

namespace evadmm {

struct DifferenceMatrix {
    int n = 0;
    Eigen::MatrixXd raw;         ///< d
    Eigen::MatrixXd normalized;  ///< d-bar
    std::vector<double> sizes;
    std::vector<double> shares;
};

/**
 * @brief Builds d and d-bar from the proposals of iterations 0 and 1.
 *
 * d(i,j)    = |E1^(i),j - E0^(j),j|_2
 * d-bar(i,j) = d(i,j) * sqrt(p_i) / (size_i + size_j)
 *
 * size_i defaults to the energy agent i assigned itself in iteration 0;
 * `size_override` substitutes another proxy such as declared EV counts.
 */
inline DifferenceMatrix build_difference_matrix(std::span<const Eigen::VectorXd> k0, std::span<const Eigen::VectorXd> k1,
                                                const std::vector<double>* size_override = nullptr) {
    const int n = static_cast<int>(k0.size());
    if (n < 1 || k1.size() != k0.size()) {
        throw DomainError("build_difference_matrix: need proposals of iterations 0 and 1 for every agent");
    }
    for (int i = 0; i < n; ++i) {
        if (k0[static_cast<std::size_t>(i)].size() != n * kHours || k1[static_cast<std::size_t>(i)].size() != n * kHours) {
            throw DomainError("build_difference_matrix: proposals must have 24n entries");
        }
    }
    DifferenceMatrix m;
    m.n = n;
    m.raw.resize(n, n);
    m.normalized.resize(n, n);
    if (size_override) {
        if (static_cast<int>(size_override->size()) != n) {
            throw DomainError("build_difference_matrix: size override needs one value per agent");
        }
        m.sizes = *size_override;
    } else {
        for (int i = 0; i < n; ++i) {
            m.sizes.push_back(k0[static_cast<std::size_t>(i)].segment(i * kHours, kHours).sum());
        }
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!(m.sizes[static_cast<std::size_t>(i)] > 0.0)) {
            throw DomainError("build_difference_matrix: agent " + std::to_string(i) + " has zero size");
        }
        total += m.sizes[static_cast<std::size_t>(i)];
    }
    for (double s : m.sizes) m.shares.push_back(s / total);

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double d = (k1[static_cast<std::size_t>(i)].segment(j * kHours, kHours) -
                              k0[static_cast<std::size_t>(j)].segment(j * kHours, kHours))
                                 .norm();
            m.raw(i, j) = d;
            m.normalized(i, j) = d * std::sqrt(m.shares[static_cast<std::size_t>(i)]) /
                                 (m.sizes[static_cast<std::size_t>(i)] + m.sizes[static_cast<std::size_t>(j)]);
        }
    }
    return m;
}

enum class CandidateSource { off_diagonal, on_diagonal };

inline std::string_view to_string(CandidateSource c) {
    return c == CandidateSource::off_diagonal ? "off-diagonal" : "on-diagonal";
}

struct DetectionResult {
    std::optional<int> deviator;
    double max_deviation = 0.0;
    /// Agent owning the row of the most deviating entry, flagged or not.
    int candidate = 0;
    CandidateSource candidate_source = CandidateSource::off_diagonal;
    double alpha = 0.0;
    int n_agents = 0;
};

/// Median; the mean of the two middle values for even counts.
inline double median(std::vector<double> v) {
    if (v.empty()) {
        throw DomainError("median of an empty set");
    }
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) {
        return hi;
    }
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

/**
 * @brief Threshold rule on one matrix.
 *
 * Off-diagonal and diagonal entries are compared with the median of their
 * own group. The entry farthest from its group median wins; its row is
 * flagged when that distance exceeds alpha. Ties resolve to the first entry
 * in row-major order, off-diagonal before diagonal.
 */
inline DetectionResult detect(const Eigen::MatrixXd& mat, double alpha) {
    const int n = static_cast<int>(mat.rows());
    if (n < 2 || mat.cols() != n) {
        throw DomainError("detect: needs a square matrix with n >= 2");
    }
    if (!(alpha >= 0.0)) {
        throw DomainError("detect: alpha must be >= 0");
    }
    std::vector<double> off;
    std::vector<double> diag;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            (i == j ? diag : off).push_back(mat(i, j));
        }
    }
    const double med_off = median(off);
    const double med_diag = median(diag);

    DetectionResult out;
    out.alpha = alpha;
    out.n_agents = n;
    out.max_deviation = -1.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dev = std::abs(mat(i, j) - med_off);
            if (dev > out.max_deviation) {
                out.max_deviation = dev;
                out.candidate = i;
                out.candidate_source = CandidateSource::off_diagonal;
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        const double dev = std::abs(mat(i, i) - med_diag);
        if (dev > out.max_deviation) {
            out.max_deviation = dev;
            out.candidate = i;
            out.candidate_source = CandidateSource::on_diagonal;
        }
    }
    if (out.max_deviation > alpha) {
        out.deviator = out.candidate;
    }
    return out;
}

inline DetectionResult detect(const DifferenceMatrix& m, double alpha, bool normalized = true) {
    return detect(normalized ? m.normalized : m.raw, alpha);
}

struct Confusion {
    long tp = 0;
    long tn = 0;
    long fp = 0;
    long fn = 0;

    long population() const { return tp + tn + fp + fn; }
    double accuracy() const { return population() ? static_cast<double>(tp + tn) / population() : 0.0; }
    /// Share of benign agent slots flagged.
    double fp_rate() const { return fp + tn ? static_cast<double>(fp) / (fp + tn) : 0.0; }
    /// Share of deviators left unflagged.
    double fn_rate() const { return tp + fn ? static_cast<double>(fn) / (tp + fn) : 0.0; }

    Confusion& operator+=(const Confusion& o) {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

/// Per-agent confusion counts of one run; every agent is one classified item.
inline Confusion classify(const DetectionResult& r, std::optional<int> truth) {
    Confusion c;
    for (int a = 0; a < r.n_agents; ++a) {
        const bool flagged = r.deviator && *r.deviator == a;
        const bool deviant = truth && *truth == a;
        if (flagged && deviant) ++c.tp;
        else if (flagged) ++c.fp;
        else if (deviant) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline Confusion confusion(std::span<const DetectionResult> results, std::span<const std::optional<int>> truth) {
    if (results.size() != truth.size()) {
        throw DomainError("accuracy: results and ground truth must align");
    }
    Confusion c;
    for (std::size_t k = 0; k < results.size(); ++k) c += classify(results[k], truth[k]);
    return c;
}

/// (TP + TN) / (n * runs)
inline double accuracy(std::span<const DetectionResult> results, std::span<const std::optional<int>> truth) {
    return confusion(results, truth).accuracy();
}

/// Accuracy of flagging nobody.
inline double naive_accuracy(std::span<const DetectionResult> results, std::span<const std::optional<int>> truth) {
    std::vector<DetectionResult> none(results.begin(), results.end());
    for (auto& r : none) r.deviator.reset();
    return accuracy(none, truth);
}

/// One detection input: a run's matrix and who actually deviated.
struct LabelledMatrix {
    Eigen::MatrixXd matrix;
    std::optional<int> truth;
};

inline Confusion evaluate_alpha(std::span<const LabelledMatrix> runs, double alpha) {
    Confusion c;
    for (const auto& r : runs) c += classify(detect(r.matrix, alpha), r.truth);
    return c;
}

struct Calibration {
    double alpha = 0.0;
    double accuracy = 0.0;
};

/**
 * @brief Alpha maximizing accuracy on labelled runs.
 *
 * Accuracy is piecewise constant in alpha and changes only where alpha
 * crosses a run's max deviation, so every candidate midpoint between
 * consecutive distinct deviations (plus one value below and one above all
 * of them) is evaluated. Among equally good intervals the median one wins.
 */
inline Calibration calibrate_alpha(std::span<const LabelledMatrix> runs) {
    if (runs.empty()) {
        throw DomainError("calibrate_alpha: no runs");
    }
    std::vector<double> devs;
    for (const auto& r : runs) devs.push_back(detect(r.matrix, 0.0).max_deviation);
    std::sort(devs.begin(), devs.end());
    devs.erase(std::unique(devs.begin(), devs.end()), devs.end());

    std::vector<double> candidates;
    candidates.push_back(devs.front() > 0.0 ? 0.5 * devs.front() : 0.0);
    for (std::size_t k = 1; k < devs.size(); ++k) candidates.push_back(0.5 * (devs[k - 1] + devs[k]));
    candidates.push_back(devs.back() > 0.0 ? 2.0 * devs.back() : 1.0);

    std::vector<double> acc;
    for (double a : candidates) acc.push_back(evaluate_alpha(runs, a).accuracy());
    const double best = *std::max_element(acc.begin(), acc.end());
    std::vector<std::size_t> ties;
    for (std::size_t k = 0; k < acc.size(); ++k) {
        if (acc[k] >= best - 1e-15) ties.push_back(k);
    }
    const std::size_t pick = ties[(ties.size() - 1) / 2];
    return {candidates[pick], acc[pick]};
}

}  // namespace evadmm
