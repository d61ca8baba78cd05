#pragma once

// Dense bounded-variable primal simplex for the small linear programs in
// dispatch, scenario dispatch, and fleet scheduling.

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace gridloop::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { le, ge, eq };

enum class Status { optimal, infeasible, unbounded, iteration_limit };

struct Row {
    std::vector<std::pair<std::size_t, double>> coeffs;
    Sense sense = Sense::le;
    double rhs = 0.0;
    std::string name;
};

/// minimize cost.x  s.t.  rows,  lower <= x <= upper.
/// Lower bounds must be finite; upper bounds may be kInf.
class Problem {
public:
    std::size_t add_var(double cost, double lower = 0.0, double upper = kInf);
    std::size_t add_row(std::vector<std::pair<std::size_t, double>> coeffs, Sense sense,
                        double rhs, std::string name = {});

    std::size_t num_vars() const noexcept { return cost_.size(); }
    std::size_t num_rows() const noexcept { return rows_.size(); }

    const std::vector<double>& cost() const noexcept { return cost_; }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    const std::vector<Row>& rows() const noexcept { return rows_; }
    std::vector<Row>& rows() noexcept { return rows_; }
    void set_cost(std::size_t var, double c) { cost_.at(var) = c; }

private:
    std::vector<double> cost_, lower_, upper_;
    std::vector<Row> rows_;
};

struct Options {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-11;
    std::size_t max_iterations = 0;  // 0: 50 * (rows + vars)
};

struct Solution {
    Status status = Status::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    /// d(objective)/d(rhs) for each row, in the row's own orientation.
    std::vector<double> duals;
    std::size_t iterations = 0;
};

Solution solve(const Problem& problem, const Options& options = {});

const char* to_string(Status s) noexcept;

}  // namespace gridloop::lp
