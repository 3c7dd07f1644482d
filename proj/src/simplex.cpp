#include "dpsched/simplex.hpp"

#include <algorithm>
#include <cmath>

namespace dpsched::simplex {

const char* to_string(Status status) {
    switch (status) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

namespace {

enum class VarState { Basic, AtLower, AtUpper, Free };

class Solver {
public:
    Solver(const Problem& p, const Options& o) : prob_(p), opt_(o) {
        m_ = static_cast<int>(p.a.rows());
        n_ = static_cast<int>(p.a.cols());
        if (p.row_lo.size() != m_ || p.row_hi.size() != m_ || p.col_lo.size() != n_ || p.col_hi.size() != n_ ||
            p.cost.size() != n_)
            throw Error(ErrorCode::InvalidInput, "simplex: inconsistent problem dimensions");
        cost_scale_ = std::max(1.0, p.cost.cwiseAbs().maxCoeff());
        setup();
    }

    Result run() {
        Result res;
        if (num_art_ > 0) {
            Vector c1 = Vector::Zero(total_);
            for (int k = 0; k < num_art_; ++k) c1(n_ + m_ + k) = 1.0;
            const Status st = iterate(c1, 1.0);
            if (st == Status::NumericalFailure) return finish(Status::NumericalFailure, res);
            double residual = 0.0;
            for (int k = 0; k < num_art_; ++k) residual += x_(n_ + m_ + k);
            res.phase1_residual = residual;
            if (residual > opt_.feasibility_tol) return finish(Status::Infeasible, res);
            for (int k = 0; k < num_art_; ++k) {
                const int j = n_ + m_ + k;
                lo_(j) = hi_(j) = 0.0;
                if (state_[j] != VarState::Basic) {
                    x_(j) = 0.0;
                    state_[j] = VarState::AtLower;
                }
            }
            refactor();
        }
        Vector c2 = Vector::Zero(total_);
        c2.head(n_) = prob_.cost;
        const Status st = iterate(c2, cost_scale_);
        return finish(st, res);
    }

private:
    void setup() {
        // structural starting point
        x_ = Vector::Zero(n_ + 2 * m_);
        lo_ = Vector::Zero(n_ + 2 * m_);
        hi_ = Vector::Zero(n_ + 2 * m_);
        state_.assign(n_ + 2 * m_, VarState::AtLower);
        for (int j = 0; j < n_; ++j) {
            lo_(j) = prob_.col_lo(j);
            hi_(j) = prob_.col_hi(j);
            if (lo_(j) > hi_(j)) throw Error(ErrorCode::InvalidInput, "simplex: column bounds crossed");
            if (std::isfinite(lo_(j))) {
                x_(j) = lo_(j);
                state_[j] = VarState::AtLower;
            } else if (std::isfinite(hi_(j))) {
                x_(j) = hi_(j);
                state_[j] = VarState::AtUpper;
            } else {
                x_(j) = 0.0;
                state_[j] = VarState::Free;
            }
        }
        const Vector activity = prob_.a * x_.head(n_);

        std::vector<int> art_rows;
        std::vector<double> art_sign;
        basis_.assign(m_, -1);
        for (int i = 0; i < m_; ++i) {
            const int j = n_ + i;
            lo_(j) = prob_.row_lo(i);
            hi_(j) = prob_.row_hi(i);
            if (lo_(j) > hi_(j)) throw Error(ErrorCode::InvalidInput, "simplex: row bounds crossed");
            const double v = activity(i);
            if (v >= lo_(j) - opt_.feasibility_tol && v <= hi_(j) + opt_.feasibility_tol) {
                x_(j) = v;
                state_[j] = VarState::Basic;
                basis_[i] = j;
            } else {
                const bool below = v < lo_(j);
                x_(j) = below ? lo_(j) : hi_(j);
                state_[j] = below ? VarState::AtLower : VarState::AtUpper;
                art_rows.push_back(i);
                art_sign.push_back(x_(j) - v > 0.0 ? 1.0 : -1.0);
            }
        }
        num_art_ = static_cast<int>(art_rows.size());
        total_ = n_ + m_ + num_art_;
        x_.conservativeResize(total_);
        lo_.conservativeResize(total_);
        hi_.conservativeResize(total_);
        state_.resize(total_);

        e_ = Matrix::Zero(m_, total_);
        e_.leftCols(n_) = prob_.a;
        e_.middleCols(n_, m_) = -Matrix::Identity(m_, m_);
        for (int k = 0; k < num_art_; ++k) {
            const int j = n_ + m_ + k;
            const int i = art_rows[k];
            e_(i, j) = art_sign[k];
            lo_(j) = 0.0;
            hi_(j) = kInf;
            state_[j] = VarState::Basic;
            basis_[i] = j;
        }
        refactor();
    }

    /// Rebuild the tableau and the basic values from the original data.
    bool refactor() {
        Matrix b(m_, m_);
        for (int i = 0; i < m_; ++i) b.col(i) = e_.col(basis_[i]);
        Eigen::PartialPivLU<Matrix> lu(b);
        // PartialPivLU does not report singularity; check the pivots instead.
        const double diag_min = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
        if (!(diag_min > 1e-13)) return false;
        tableau_ = lu.solve(e_);
        Vector rhs = Vector::Zero(m_);
        for (int j = 0; j < total_; ++j)
            if (state_[j] != VarState::Basic && x_(j) != 0.0) rhs -= e_.col(j) * x_(j);
        const Vector xb = lu.solve(rhs);
        for (int i = 0; i < m_; ++i) x_(basis_[i]) = xb(i);
        since_refactor_ = 0;
        return true;
    }

    Vector reduced_costs(const Vector& c) const {
        Vector cb(m_);
        for (int i = 0; i < m_; ++i) cb(i) = c(basis_[i]);
        Vector d = c - tableau_.transpose() * cb;
        for (int i = 0; i < m_; ++i) d(basis_[i]) = 0.0;
        return d;
    }

    /// Entering column and direction (+1 increase, -1 decrease), or -1.
    std::pair<int, double> choose_entering(const Vector& d, double tol, bool bland) const {
        int best = -1;
        double best_dir = 0.0;
        double best_score = 0.0;
        for (int j = 0; j < total_; ++j) {
            const VarState st = state_[j];
            if (st == VarState::Basic || lo_(j) == hi_(j)) continue;
            double dir = 0.0;
            if ((st == VarState::AtLower || st == VarState::Free) && d(j) < -tol) dir = 1.0;
            else if ((st == VarState::AtUpper || st == VarState::Free) && d(j) > tol) dir = -1.0;
            if (dir == 0.0) continue;
            if (bland) return {j, dir};
            const double score = std::abs(d(j));
            if (score > best_score) {
                best_score = score;
                best = j;
                best_dir = dir;
            }
        }
        return {best, best_dir};
    }

    Status iterate(const Vector& c, double scale) {
        const double tol = opt_.optimality_tol * scale;
        const long cap = opt_.max_iterations > 0 ? opt_.max_iterations : 50L * (m_ + total_) + 1000;
        int degenerate_run = 0;
        while (true) {
            if (iterations_ >= cap) return Status::NumericalFailure;
            if (since_refactor_ >= opt_.refactor_interval && !refactor()) return Status::NumericalFailure;

            const Vector d = reduced_costs(c);
            const bool bland = degenerate_run > 25;
            auto [enter, dir] = choose_entering(d, tol, bland);
            if (enter < 0) {
                if (since_refactor_ == 0) return Status::Optimal;
                // confirm against a fresh factorization before declaring optimality
                if (!refactor()) return Status::NumericalFailure;
                continue;
            }

            // Harris two-pass ratio test.
            const double ftol = opt_.feasibility_tol;
            double relaxed = kInf;
            for (int i = 0; i < m_; ++i) {
                const double a = -dir * tableau_(i, enter);
                const int b = basis_[i];
                if (a > opt_.pivot_tol && std::isfinite(hi_(b)))
                    relaxed = std::min(relaxed, (hi_(b) - x_(b) + ftol) / a);
                else if (a < -opt_.pivot_tol && std::isfinite(lo_(b)))
                    relaxed = std::min(relaxed, (x_(b) - lo_(b) + ftol) / -a);
            }
            const double flip = hi_(enter) - lo_(enter);
            int leave_row = -1;
            double step = kInf;
            double best_pivot = 0.0;
            for (int i = 0; i < m_; ++i) {
                const double a = -dir * tableau_(i, enter);
                const int b = basis_[i];
                double ratio = kInf;
                if (a > opt_.pivot_tol && std::isfinite(hi_(b))) ratio = (hi_(b) - x_(b)) / a;
                else if (a < -opt_.pivot_tol && std::isfinite(lo_(b))) ratio = (x_(b) - lo_(b)) / -a;
                else continue;
                if (ratio > relaxed) continue;
                const bool better = bland ? (leave_row < 0 || b < basis_[leave_row]) : std::abs(a) > best_pivot;
                if (better) {
                    best_pivot = std::abs(a);
                    leave_row = i;
                    step = std::max(ratio, 0.0);
                }
            }

            if (std::isfinite(flip) && flip <= step) {
                // bound flip, basis unchanged
                x_(enter) = dir > 0 ? hi_(enter) : lo_(enter);
                state_[enter] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
                for (int i = 0; i < m_; ++i) x_(basis_[i]) -= dir * flip * tableau_(i, enter);
                ++iterations_;
                degenerate_run = 0;
                continue;
            }
            if (leave_row < 0) return Status::Unbounded;

            const int leave = basis_[leave_row];
            const double a_leave = -dir * tableau_(leave_row, enter);
            x_(enter) += dir * step;
            for (int i = 0; i < m_; ++i) x_(basis_[i]) -= dir * step * tableau_(i, enter);
            if (a_leave > 0) {
                x_(leave) = hi_(leave);
                state_[leave] = VarState::AtUpper;
            } else {
                x_(leave) = lo_(leave);
                state_[leave] = VarState::AtLower;
            }
            if (lo_(leave) == hi_(leave)) state_[leave] = VarState::AtLower;
            state_[enter] = VarState::Basic;
            basis_[leave_row] = enter;

            const double piv = tableau_(leave_row, enter);
            tableau_.row(leave_row) /= piv;
            for (int i = 0; i < m_; ++i) {
                if (i == leave_row) continue;
                const double factor = tableau_(i, enter);
                if (factor != 0.0) tableau_.row(i) -= factor * tableau_.row(leave_row);
            }
            ++iterations_;
            ++since_refactor_;
            degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;
        }
    }

    Result& finish(Status status, Result& res) {
        res.status = status;
        res.iterations = iterations_;
        if (status == Status::NumericalFailure) return res;
        if (!refactor()) {
            res.status = Status::NumericalFailure;
            return res;
        }
        res.x = x_.head(n_);
        res.row_activity = prob_.a * res.x;
        res.objective = prob_.cost.dot(res.x);

        double primal = 0.0;
        for (int j = 0; j < n_ + m_; ++j) {
            primal = std::max(primal, lo_(j) - x_(j));
            primal = std::max(primal, x_(j) - hi_(j));
        }
        primal = std::max(primal, (res.row_activity - x_.segment(n_, m_)).cwiseAbs().maxCoeff());
        for (int i = 0; i < m_; ++i) {
            primal = std::max(primal, prob_.row_lo(i) - res.row_activity(i));
            primal = std::max(primal, res.row_activity(i) - prob_.row_hi(i));
        }
        res.primal_infeasibility = primal;

        if (status == Status::Optimal) {
            Matrix b(m_, m_);
            Vector cb(m_);
            Vector c = Vector::Zero(total_);
            c.head(n_) = prob_.cost;
            for (int i = 0; i < m_; ++i) {
                b.col(i) = e_.col(basis_[i]);
                cb(i) = c(basis_[i]);
            }
            const Vector pi = b.transpose().partialPivLu().solve(cb);
            const Vector d = c - e_.transpose() * pi;
            double dual = 0.0;
            for (int j = 0; j < total_; ++j) {
                if (state_[j] == VarState::Basic || lo_(j) == hi_(j)) continue;
                if (state_[j] == VarState::AtLower || state_[j] == VarState::Free) dual = std::max(dual, -d(j));
                if (state_[j] == VarState::AtUpper || state_[j] == VarState::Free) dual = std::max(dual, d(j));
            }
            res.row_duals = pi;
            res.reduced_costs = d.head(n_);
            res.dual_infeasibility = dual / cost_scale_;
            if (primal > 10 * opt_.feasibility_tol || res.dual_infeasibility > 10 * opt_.optimality_tol)
                res.status = Status::NumericalFailure;
        }
        return res;
    }

    const Problem& prob_;
    Options opt_;
    int m_ = 0, n_ = 0, num_art_ = 0, total_ = 0;
    double cost_scale_ = 1.0;
    Matrix e_;
    Matrix tableau_;
    Vector x_, lo_, hi_;
    std::vector<VarState> state_;
    std::vector<int> basis_;
    long iterations_ = 0;
    int since_refactor_ = 0;
};

}  // namespace

Result solve(const Problem& problem, const Options& options) {
    if (problem.a.rows() == 0) {
        // no rows: each variable sits at the bound its cost prefers
        Result res;
        const auto n = problem.a.cols();
        res.x = Vector::Zero(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double c = problem.cost(j);
            const double v = c > 0 ? problem.col_lo(j) : c < 0 ? problem.col_hi(j) : std::max(problem.col_lo(j), std::min(0.0, problem.col_hi(j)));
            if (!std::isfinite(v)) {
                res.status = Status::Unbounded;
                return res;
            }
            res.x(j) = v;
        }
        res.status = Status::Optimal;
        res.objective = problem.cost.dot(res.x);
        res.row_activity = Vector::Zero(0);
        res.row_duals = Vector::Zero(0);
        res.reduced_costs = problem.cost;
        return res;
    }
    Solver solver(problem, options);
    return solver.run();
}

}  // namespace dpsched::simplex
