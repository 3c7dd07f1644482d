#pragma once

#include "dpsched/model.hpp"

#include <limits>

/// Dense two-phase primal simplex for small linear programs of the form
///
///     minimize    c'x
///     subject to  row_lo <= A x <= row_hi
///                 col_lo <=   x <= col_hi
///
/// Every row gets a logical variable r = A x carrying the row bounds, so the
/// working system is [A  -I] z = 0 with bounded z. Phase 1 adds one
/// artificial per row whose logical cannot start inside its range. The
/// tableau is rebuilt from the original data through an LU factorization of
/// the basis every `refactor_interval` pivots and before any verdict is
/// returned, and the final answer is certified with basis-derived duals.
namespace dpsched::simplex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Problem {
    Matrix a;
    Vector row_lo, row_hi;
    Vector col_lo, col_hi;
    Vector cost;
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalFailure };

const char* to_string(Status status);

struct Options {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-11;
    int refactor_interval = 40;
    long max_iterations = 0;  // 0 = automatic
};

struct Result {
    Status status = Status::NumericalFailure;
    Vector x;                   // structural values
    Vector row_activity;        // A x
    Vector row_duals;           // one multiplier per row
    Vector reduced_costs;       // per structural column
    double objective = 0.0;
    double primal_infeasibility = 0.0;  // max bound or row violation at x
    double dual_infeasibility = 0.0;    // max wrong-signed reduced cost
    double phase1_residual = 0.0;       // sum of artificials at the end of phase 1
    long iterations = 0;
};

Result solve(const Problem& problem, const Options& options = {});

}  // namespace dpsched::simplex
