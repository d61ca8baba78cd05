#include "gridloop/lp.hpp"

#include <algorithm>
#include <cmath>
#include <span>

#include "gridloop/error.hpp"
#include "gridloop/simd.hpp"

namespace gridloop::lp {

std::size_t Problem::add_var(double cost, double lower, double upper) {
    if (!std::isfinite(lower)) throw InvalidArgument("lp: lower bounds must be finite");
    if (upper < lower) throw InvalidArgument("lp: upper bound below lower bound");
    cost_.push_back(cost);
    lower_.push_back(lower);
    upper_.push_back(upper);
    return cost_.size() - 1;
}

std::size_t Problem::add_row(std::vector<std::pair<std::size_t, double>> coeffs, Sense sense,
                             double rhs, std::string name) {
    for (const auto& [j, a] : coeffs) {
        if (j >= cost_.size()) throw InvalidArgument("lp: row references unknown variable");
        (void)a;
    }
    rows_.push_back(Row{std::move(coeffs), sense, rhs, std::move(name)});
    return rows_.size() - 1;
}

const char* to_string(Status s) noexcept {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

namespace {

constexpr double kTie = 1e-12;

// Working state of the tableau. Variables are shifted so every lower bound
// is zero; a nonbasic column sits at 0 or at its upper bound.
class Tableau {
public:
    Tableau(const Problem& p, const Options& opt) : opt_(opt), m_(p.num_rows()), n_(p.num_vars()) {
        // Column layout: structural | slacks | artificials.
        std::size_t slacks = 0;
        for (const auto& r : p.rows())
            if (r.sense != Sense::eq) ++slacks;
        std::vector<double> shifted_rhs(m_);
        row_sign_.assign(m_, 1.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const Row& r = p.rows()[i];
            double b = r.rhs;
            for (const auto& [j, a] : r.coeffs) b -= a * p.lower()[j];
            shifted_rhs[i] = b;
        }
        std::size_t artificials = 0;
        std::vector<double> slack_coef(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const Row& r = p.rows()[i];
            if (shifted_rhs[i] < 0.0) row_sign_[i] = -1.0;
            if (r.sense == Sense::le) slack_coef[i] = row_sign_[i];
            if (r.sense == Sense::ge) slack_coef[i] = -row_sign_[i];
            if (slack_coef[i] != 1.0) ++artificials;
        }
        cols_ = n_ + slacks + artificials;
        first_art_ = n_ + slacks;
        t_.assign(m_ * cols_, 0.0);
        beta_.resize(m_);
        basis_.resize(m_);
        unit_col_.resize(m_);
        upper_.assign(cols_, kInf);
        at_upper_.assign(cols_, 0);
        basic_.assign(cols_, 0);
        for (std::size_t j = 0; j < n_; ++j) upper_[j] = p.upper()[j] - p.lower()[j];

        std::size_t next_slack = n_, next_art = first_art_;
        for (std::size_t i = 0; i < m_; ++i) {
            const Row& r = p.rows()[i];
            double* row = &t_[i * cols_];
            for (const auto& [j, a] : r.coeffs) row[j] += row_sign_[i] * a;
            beta_[i] = row_sign_[i] * shifted_rhs[i];
            if (r.sense != Sense::eq) {
                row[next_slack] = slack_coef[i];
                if (slack_coef[i] == 1.0) unit_col_[i] = next_slack;
                ++next_slack;
            }
            if (slack_coef[i] != 1.0) {
                row[next_art] = 1.0;
                unit_col_[i] = next_art++;
            }
            basis_[i] = unit_col_[i];
            basic_[basis_[i]] = 1;
        }
        max_iter_ = opt.max_iterations ? opt.max_iterations : 50 * (m_ + cols_) + 100;
    }

    // Minimizes cost over the current feasible basis.
    Status optimize(const std::vector<double>& cost) {
        reduced_costs(cost);
        std::size_t degenerate_run = 0;
        while (true) {
            if (iterations_ >= max_iter_) return Status::iteration_limit;
            const bool bland = degenerate_run > 50;
            const std::ptrdiff_t q = entering(bland);
            if (q < 0) return Status::optimal;
            const double dir = at_upper_[q] ? -1.0 : 1.0;

            // Ratio test.
            double step = upper_[q];
            std::ptrdiff_t leave = -1;
            bool leave_to_upper = false;
            double best_pivot = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                const double alpha = dir * t_[i * cols_ + q];
                double limit;
                bool to_upper;
                if (alpha > opt_.pivot_tol) {
                    limit = std::max(beta_[i], 0.0) / alpha;
                    to_upper = false;
                } else if (alpha < -opt_.pivot_tol && std::isfinite(upper_[basis_[i]])) {
                    limit = std::max(upper_[basis_[i]] - beta_[i], 0.0) / (-alpha);
                    to_upper = true;
                } else {
                    continue;
                }
                const double mag = std::abs(alpha);
                bool take = limit < step - kTie;
                // A tie with the entering column's own bound flip keeps the flip.
                if (!take && leave >= 0 && limit <= step + kTie)
                    take = bland ? basis_[i] < basis_[static_cast<std::size_t>(leave)]
                                 : mag > best_pivot;
                if (take) {
                    step = limit;
                    leave = static_cast<std::ptrdiff_t>(i);
                    leave_to_upper = to_upper;
                    best_pivot = mag;
                }
            }
            if (!std::isfinite(step)) return Status::unbounded;
            ++iterations_;
            degenerate_run = step <= opt_.feasibility_tol ? degenerate_run + 1 : 0;

            for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * step * t_[i * cols_ + q];
            if (leave < 0) {
                at_upper_[q] = !at_upper_[q];
                continue;
            }
            const auto r = static_cast<std::size_t>(leave);
            const double entering_value = (at_upper_[q] ? upper_[q] : 0.0) + dir * step;
            const std::size_t old = basis_[r];
            at_upper_[old] = leave_to_upper ? 1 : 0;
            at_upper_[q] = 0;
            basis_[r] = static_cast<std::size_t>(q);
            basic_[old] = 0;
            basic_[q] = 1;
            pivot(r, static_cast<std::size_t>(q));
            beta_[r] = entering_value;
        }
    }

    std::size_t m() const { return m_; }
    std::size_t first_artificial() const { return first_art_; }
    std::size_t cols() const { return cols_; }

    // Value of every column at the current basis.
    std::vector<double> values() const {
        std::vector<double> v(cols_, 0.0);
        for (std::size_t j = 0; j < cols_; ++j)
            if (at_upper_[j]) v[j] = upper_[j];
        for (std::size_t i = 0; i < m_; ++i) v[basis_[i]] = beta_[i];
        return v;
    }

    void close_artificials() {
        for (std::size_t j = first_art_; j < cols_; ++j) {
            upper_[j] = 0.0;
            at_upper_[j] = 0;
        }
    }

    double row_dual(std::size_t i) const { return -d_[unit_col_[i]] * row_sign_[i]; }
    std::size_t iterations() const { return iterations_; }

private:
    void reduced_costs(const std::vector<double>& cost) {
        d_ = cost;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb != 0.0)
                simd::axpy(-cb, std::span<const double>(&t_[i * cols_], cols_), d_);
        }
        for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
    }

    std::ptrdiff_t entering(bool bland) const {
        std::ptrdiff_t best = -1;
        double best_score = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            if (upper_[j] <= 0.0) continue;
            double score = 0.0;
            if (!at_upper_[j] && d_[j] < -opt_.optimality_tol) score = -d_[j];
            else if (at_upper_[j] && d_[j] > opt_.optimality_tol) score = d_[j];
            else continue;
            if (basic_[j]) continue;
            if (bland) return static_cast<std::ptrdiff_t>(j);
            if (score > best_score) {
                best_score = score;
                best = static_cast<std::ptrdiff_t>(j);
            }
        }
        return best;
    }

    void pivot(std::size_t r, std::size_t q) {
        double* prow = &t_[r * cols_];
        const double inv = 1.0 / prow[q];
        for (std::size_t j = 0; j < cols_; ++j) prow[j] *= inv;
        prow[q] = 1.0;
        const std::span<const double> pivot_row(prow, cols_);
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double* row = &t_[i * cols_];
            const double f = row[q];
            if (f == 0.0) continue;
            simd::axpy(-f, pivot_row, std::span<double>(row, cols_));
            row[q] = 0.0;
        }
        const double fd = d_[q];
        if (fd != 0.0) simd::axpy(-fd, pivot_row, d_);
        d_[q] = 0.0;
    }

    const Options& opt_;
    std::size_t m_, n_, cols_ = 0, first_art_ = 0;
    std::vector<double> t_, beta_, upper_, d_, row_sign_;
    std::vector<std::size_t> basis_, unit_col_;
    std::vector<char> at_upper_, basic_;
    std::size_t iterations_ = 0, max_iter_ = 0;
};

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
    Solution sol;
    Tableau tab(problem, options);

    double rhs_scale = 1.0;
    for (const auto& r : problem.rows()) rhs_scale = std::max(rhs_scale, std::abs(r.rhs));

    if (tab.first_artificial() < tab.cols()) {
        std::vector<double> phase1(tab.cols(), 0.0);
        for (std::size_t j = tab.first_artificial(); j < tab.cols(); ++j) phase1[j] = 1.0;
        const Status s1 = tab.optimize(phase1);
        if (s1 == Status::iteration_limit) {
            sol.status = s1;
            sol.iterations = tab.iterations();
            return sol;
        }
        const auto v = tab.values();
        double infeas = 0.0;
        for (std::size_t j = tab.first_artificial(); j < tab.cols(); ++j) infeas += v[j];
        if (infeas > options.feasibility_tol * rhs_scale * 10.0) {
            sol.status = Status::infeasible;
            sol.iterations = tab.iterations();
            return sol;
        }
        tab.close_artificials();
    }

    std::vector<double> phase2(tab.cols(), 0.0);
    std::copy(problem.cost().begin(), problem.cost().end(), phase2.begin());
    sol.status = tab.optimize(phase2);
    sol.iterations = tab.iterations();
    if (sol.status != Status::optimal) return sol;

    const auto v = tab.values();
    sol.x.resize(problem.num_vars());
    sol.objective = 0.0;
    for (std::size_t j = 0; j < problem.num_vars(); ++j) {
        sol.x[j] = v[j] + problem.lower()[j];
        sol.objective += problem.cost()[j] * sol.x[j];
    }
    sol.duals.resize(problem.num_rows());
    for (std::size_t i = 0; i < problem.num_rows(); ++i) sol.duals[i] = tab.row_dual(i);
    return sol;
}

}  // namespace gridloop::lp
