#pragma once

/**
 * @file ipm.hpp
 *
 * @brief Primal-dual interior-point method for smooth objectives over polytopes.
 *
 * Solves  min f(x)  s.t.  G x <= h,  A x = b  with a Mehrotra
 * predictor-corrector path-following scheme. The start may be infeasible:
 * slacks keep the inequality multipliers interior while primal residuals
 * shrink along the Newton steps. The reduced system H + G'WG is sparse and
 * factorized with a simplicial Cholesky; equality rows are handled through
 * a small dense Schur complement.
 *
 * An objective type provides:
 *
 *     double value(const Eigen::VectorXd& x) const;
 *     void gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const;
 *     void hessian(const Eigen::VectorXd& x, std::vector<Eigen::Triplet<double>>& out) const;
 *
 * `hessian` appends every nonzero of the (full, symmetric) Hessian.
 */

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace evadmm::ipm {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Sparse linear row `coef . x (<= or ==) rhs`.
struct Row {
    std::vector<int> idx;
    std::vector<double> coef;
    double rhs = 0.0;
};

struct Constraints {
    int dim = 0;
    std::vector<Row> ineq;
    std::vector<Row> eq;
};

struct Options {
    /// Relative dual residual and duality measure at termination.
    double tol = 1e-8;
    /// Relative primal residual at termination.
    double primal_tol = 1e-12;
    int max_iters = 150;
};

struct Result {
    Eigen::VectorXd x;
    double objective = 0.0;
    /// max(relative dual residual, relative gap, relative primal residual)
    double kkt_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline Eigen::SparseMatrix<double> assemble(const std::vector<Row>& rows, int dim, Eigen::VectorXd& rhs) {
    Triplets trips;
    rhs.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t k = 0; k < rows[r].idx.size(); ++k) {
            trips.emplace_back(static_cast<int>(r), rows[r].idx[k], rows[r].coef[k]);
        }
        rhs(static_cast<Eigen::Index>(r)) = rows[r].rhs;
    }
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(rows.size()), dim);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

inline double inf_norm(const Eigen::VectorXd& v) {
    return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

/// Largest step in (0, 1] keeping v + a*dv >= 0.
inline double step_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) {
            a = std::min(a, -v(i) / dv(i));
        }
    }
    return a;
}

}  // namespace detail

template <class Objective>
Result minimize(const Objective& f, const Constraints& cons, Eigen::VectorXd x, const Options& opt = {}) {
    using Eigen::VectorXd;
    const int n = cons.dim;
    Result out;
    if (n == 0) {
        out.x = VectorXd(0);
        out.objective = f.value(out.x);
        out.kkt_residual = 0.0;
        out.converged = true;
        return out;
    }
    if (x.size() != n) {
        x = VectorXd::Zero(n);
    }

    VectorXd h, b;
    const Eigen::SparseMatrix<double> G = detail::assemble(cons.ineq, n, h);
    const Eigen::SparseMatrix<double> A = detail::assemble(cons.eq, n, b);
    const Eigen::SparseMatrix<double> Gt = G.transpose();
    const Eigen::SparseMatrix<double> At = A.transpose();
    const Eigen::Index m = G.rows();
    const Eigen::Index p = A.rows();
    const double h_scale = 1.0 + detail::inf_norm(h);
    const double b_scale = 1.0 + detail::inf_norm(b);

    VectorXd g(n);
    f.gradient(x, g);
    const double slack_floor = 1e-2 * std::max(1.0, detail::inf_norm(h));
    VectorXd s = (h - G * x).cwiseMax(slack_floor);
    VectorXd z = VectorXd::Constant(m, std::max(1.0, 1e-2 * detail::inf_norm(g)));
    VectorXd y = VectorXd::Zero(p);

    Triplets trips;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol;
    Eigen::SparseMatrix<double> K(n, n);
    Eigen::SparseMatrix<double> identity(n, n);
    identity.setIdentity();
    Eigen::MatrixXd KinvAt;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> schur;

    VectorXd best_x = x;
    double best_res = std::numeric_limits<double>::infinity();

    struct Residuals {
        VectorXd rd, req, rin;
        double fval = 0.0, res_d = 0.0, res_p = 0.0, gap = 0.0;
        double merit() const { return rd.norm() + req.norm() + rin.norm(); }
    };
    auto residuals = [&](const VectorXd& xx, const VectorXd& ss, const VectorXd& zz, const VectorXd& yy,
                         VectorXd& grad) {
        Residuals r;
        f.gradient(xx, grad);
        r.fval = f.value(xx);
        r.rd = grad;
        if (m) r.rd += Gt * zz;
        if (p) r.rd += At * yy;
        r.req = p ? VectorXd(A * xx - b) : VectorXd(0);
        r.rin = m ? VectorXd(G * xx + ss - h) : VectorXd(0);
        r.res_d = detail::inf_norm(r.rd) / (1.0 + detail::inf_norm(grad));
        r.res_p = std::max(detail::inf_norm(r.req) / b_scale, detail::inf_norm(r.rin) / h_scale);
        r.gap = m ? ss.dot(zz) / (1.0 + std::abs(r.fval)) : 0.0;
        return r;
    };

    for (int it = 0; it < opt.max_iters; ++it) {
        Residuals r = residuals(x, s, z, y, g);
        const double kkt = std::max({r.res_d, r.gap, r.res_p * opt.tol / opt.primal_tol});
        out.iterations = it;
#ifdef EVADMM_IPM_TRACE
        std::fprintf(stderr, "ipm %3d f=%.6e rd=%.2e rp=%.2e gap=%.2e\n", it, r.fval, r.res_d, r.res_p, r.gap);
#endif
        if (kkt < best_res) {
            best_res = kkt;
            best_x = x;
        }
        if (r.res_d <= opt.tol && r.gap <= opt.tol && r.res_p <= opt.primal_tol) {
            out.x = x;
            out.objective = r.fval;
            out.kkt_residual = std::max({r.res_d, r.gap, r.res_p});
            out.converged = true;
            return out;
        }
        const double mu = m ? s.dot(z) / static_cast<double>(m) : 0.0;
        const VectorXd w = m ? VectorXd(z.cwiseQuotient(s)) : VectorXd(0);

        trips.clear();
        f.hessian(x, trips);
        Eigen::SparseMatrix<double> H(n, n);
        H.setFromTriplets(trips.begin(), trips.end());
        K = H;
        if (m) {
            K += Gt * w.asDiagonal() * G;
        }
        double diag_scale = 1.0;
        for (int k = 0; k < n; ++k) {
            diag_scale = std::max(diag_scale, std::abs(K.coeff(k, k)));
        }
        // Shift the diagonal until the reduced Hessian factors (only needed when f is locally nonconvex).
        double shift = 0.0;
        chol.compute(K);
        while (chol.info() != Eigen::Success) {
            shift = shift == 0.0 ? 1e-10 * diag_scale : shift * 100.0;
            if (shift > 1e6 * diag_scale) {
                break;
            }
            chol.compute(K + shift * identity);
        }
        if (chol.info() != Eigen::Success) {
            break;
        }
        if (p) {
            KinvAt = chol.solve(Eigen::MatrixXd(At));
            Eigen::MatrixXd S = A * KinvAt;
            schur.compute(S);
        }

        auto newton = [&](const VectorXd& rc, VectorXd& dx, VectorXd& ds, VectorXd& dz, VectorXd& dy) {
            VectorXd r1 = -r.rd;
            if (m) {
                r1 -= Gt * (w.cwiseProduct(r.rin) - rc.cwiseQuotient(s));
            }
            if (p) {
                const VectorXd Kr1 = chol.solve(r1);
                dy = schur.solve(VectorXd(A * Kr1 + r.req));
                dx = Kr1 - KinvAt * dy;
            } else {
                dx = chol.solve(r1);
                dy = VectorXd(0);
            }
            if (m) {
                const VectorXd Gdx = G * dx;
                dz = w.cwiseProduct(Gdx + r.rin) - rc.cwiseQuotient(s);
                ds = -r.rin - Gdx;
            } else {
                dz = VectorXd(0);
                ds = VectorXd(0);
            }
        };

        VectorXd dx, ds, dz, dy;
        double sigma = 0.0;
        VectorXd rc = m ? VectorXd(s.cwiseProduct(z)) : VectorXd(0);
        newton(rc, dx, ds, dz, dy);
        VectorXd ds_aff, dz_aff;
        if (m) {
            const double a_aff = std::min(detail::step_to_boundary(s, ds), detail::step_to_boundary(z, dz));
            const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
            sigma = std::clamp(std::pow(mu_aff / std::max(mu, 1e-300), 3.0), 0.0, 1.0);
            ds_aff = ds;
            dz_aff = dz;
        }
        const VectorXd target = VectorXd::Constant(m, sigma * mu);

        // Squared residual of the Newton system for the centered target. The
        // plain centered direction is a descent direction for it; the Mehrotra
        // corrector usually is too, and is tried first.
        auto merit = [&](const Residuals& rr, const VectorXd& ss, const VectorXd& zz) {
            double v = rr.rd.squaredNorm() + rr.req.squaredNorm() + rr.rin.squaredNorm();
            if (m) v += (ss.cwiseProduct(zz) - target).squaredNorm();
            return v;
        };
        const double merit0 = merit(r, s, z);
        VectorXd gt(n);
        double alpha = 0.0;
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (m) {
                rc = s.cwiseProduct(z) - target;
                if (attempt == 0) rc += ds_aff.cwiseProduct(dz_aff);
                newton(rc, dx, ds, dz, dy);
            }
            alpha = 1.0;
            if (m) {
                alpha = std::min(1.0, 0.995 * std::min(detail::step_to_boundary(s, ds),
                                                       detail::step_to_boundary(z, dz)));
            }
            const int max_bt = attempt == 0 ? 8 : 40;
            bool ok = false;
            for (int bt = 0; bt < max_bt; ++bt) {
                const VectorXd st = s + alpha * ds;
                const VectorXd zt = z + alpha * dz;
                const Residuals rt = residuals(x + alpha * dx, st, zt, y + alpha * dy, gt);
                const double mt = merit(rt, st, zt);
                if (std::isfinite(mt) && mt <= (1.0 - 1e-4 * alpha) * merit0) {
                    ok = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (ok || !m) break;
        }
#ifdef EVADMM_IPM_TRACE
        std::fprintf(stderr, "    alpha=%.3e |dx|=%.3e merit0=%.3e\n", alpha, dx.norm(), merit0);
#endif
        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;
        y += alpha * dy;
    }

    Residuals r = residuals(x, s, z, y, g);
    const double kkt = std::max({r.res_d, r.gap, r.res_p});
    out.iterations = opt.max_iters;
    if (kkt <= best_res) {
        best_x = x;
        best_res = kkt;
    }
    out.x = best_x;
    out.objective = f.value(best_x);
    out.kkt_residual = best_res;
    out.converged = false;
    return out;
}

/**
 * @brief View of an objective restricted to a subset of coordinates.
 *
 * Coordinates outside `free` stay at their value in `base`.
 */
template <class Objective>
class Restricted {
public:
    Restricted(const Objective& f, Eigen::VectorXd base, std::vector<int> free)
        : f_(f), base_(std::move(base)), free_(std::move(free)), pos_(base_.size(), -1) {
        for (std::size_t k = 0; k < free_.size(); ++k) {
            pos_[static_cast<std::size_t>(free_[k])] = static_cast<int>(k);
        }
    }

    Eigen::VectorXd expand(const Eigen::VectorXd& xr) const {
        Eigen::VectorXd full = base_;
        for (std::size_t k = 0; k < free_.size(); ++k) {
            full(free_[k]) = xr(static_cast<Eigen::Index>(k));
        }
        return full;
    }

    Eigen::VectorXd restrict(const Eigen::VectorXd& full) const {
        Eigen::VectorXd xr(static_cast<Eigen::Index>(free_.size()));
        for (std::size_t k = 0; k < free_.size(); ++k) {
            xr(static_cast<Eigen::Index>(k)) = full(free_[k]);
        }
        return xr;
    }

    double value(const Eigen::VectorXd& xr) const { return f_.value(expand(xr)); }

    void gradient(const Eigen::VectorXd& xr, Eigen::VectorXd& g) const {
        Eigen::VectorXd full(base_.size());
        f_.gradient(expand(xr), full);
        g = restrict(full);
    }

    void hessian(const Eigen::VectorXd& xr, Triplets& out) const {
        scratch_.clear();
        f_.hessian(expand(xr), scratch_);
        for (const auto& t : scratch_) {
            const int r = pos_[static_cast<std::size_t>(t.row())];
            const int c = pos_[static_cast<std::size_t>(t.col())];
            if (r >= 0 && c >= 0) {
                out.emplace_back(r, c, t.value());
            }
        }
    }

    int position(int full_index) const { return pos_[static_cast<std::size_t>(full_index)]; }
    const std::vector<int>& free() const { return free_; }

private:
    const Objective& f_;
    Eigen::VectorXd base_;
    std::vector<int> free_;
    std::vector<int> pos_;
    mutable Triplets scratch_;
};

}  // namespace evadmm::ipm
