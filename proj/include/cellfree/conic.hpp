#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

namespace cellfree::conic {

enum class ConeType { Orthant, Soc };

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterLimit, NumericalTrouble };

std::string to_string(SolveStatus status);

/// One cone block of a program in standard form: the affine image
/// y = F_b x + g_b must lie in the block's cone (componentwise y >= 0 for the
/// orthant, y_0 >= ||y_1..|| for a second-order cone). A dimension-1 SOC is
/// the same constraint as a one-row orthant and is treated as such.
struct ConeBlock {
    ConeType type;
    int dim;
    std::string name;
    std::vector<Eigen::Triplet<double>> coeffs; // (local row, variable, value)
    Eigen::VectorXd offset;                     // g_b
};

/// minimize c'x subject to F_b x + g_b in K_b for every block b.
class ConicProgram {
  public:
    explicit ConicProgram(int n_vars);

    int n_vars() const { return n_vars_; }
    int n_rows() const { return n_rows_; }

    void set_objective(const Eigen::VectorXd &c);
    const Eigen::VectorXd &objective() const { return c_; }

    /// Returns the block handle used by add_coeff/set_offset.
    int add_block(ConeType type, int dim, std::string name = {});
    void add_coeff(int block, int row, int var, double value);
    void set_offset(int block, int row, double value);

    const std::vector<ConeBlock> &blocks() const { return blocks_; }
    const ConeBlock &block(int b) const { return blocks_.at(b); }

    /// Stacked affine map over all blocks in declaration order: y = F x + g.
    Eigen::SparseMatrix<double> affine_matrix() const;
    Eigen::VectorXd affine_offset() const;

    /// Plain-text dump (CBF-flavoured) for debugging against external solvers.
    std::string dump() const;

  private:
    int n_vars_;
    int n_rows_ = 0;
    Eigen::VectorXd c_;
    std::vector<ConeBlock> blocks_;
};

/// Residuals recomputed from problem data and a candidate solution only.
/// All quantities are raw (unnormalized):
///   primal_infeas   worst cone violation of F x + g over all blocks
///   dual_infeas     || F' z - c ||_2
///   dual_cone_infeas worst cone violation of the stacked multipliers
///   abs_gap         c'x + g'z  (primal objective minus dual objective)
///   rel_gap         |abs_gap| / (1 + |c'x|)
///   certificate     for Infeasible: ray residual max(||F'z||_inf, cone viol)
///                   with the ray scaled so g'z = -1;
///                   for Unbounded: cone violation of F x with c'x = -1
struct ResidualReport {
    double primal_infeas = 0.0;
    double dual_infeas = 0.0;
    double dual_cone_infeas = 0.0;
    double abs_gap = 0.0;
    double rel_gap = 0.0;
    double certificate = 0.0;
};

struct ConicSolution {
    SolveStatus status = SolveStatus::NumericalTrouble;
    Eigen::VectorXd x;                 // primal point, or the improving ray when Unbounded
    std::vector<Eigen::VectorXd> duals; // per block; the dual improving ray when Infeasible
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    ResidualReport residuals;
    int iterations = 0;
};

struct SolverOptions {
    double feas_tol = 1e-8;    // primal/dual feasibility (raw, see ResidualReport)
    double abs_gap_tol = 1e-8; // absolute duality gap
    double rel_gap_tol = 1e-8; // gap relative to 1 + |objective|
    int max_iters = 200;
    int refine_iters = 9;       // iterative refinement cap per KKT solve
    double static_reg = 7e-8;   // static KKT regularization
    int equil_iters = 3;        // Ruiz equilibration sweeps
    bool verbose = false;
};

/// Pluggable solver interface so an external SOCP solver can be swapped in
/// for cross-validation.
class Solver {
  public:
    virtual ~Solver() = default;
    virtual ConicSolution solve(const ConicProgram &prog, const SolverOptions &opts) const = 0;
};

/// Embedded primal-dual interior-point method on the homogeneous self-dual
/// embedding, with Nesterov-Todd scaled directions and a Mehrotra-style
/// predictor-corrector. Stateless between calls.
class InteriorPointSolver final : public Solver {
  public:
    ConicSolution solve(const ConicProgram &prog, const SolverOptions &opts) const override;
};

ConicSolution solve(const ConicProgram &prog, const SolverOptions &opts = {});

/// Recomputes every residual from scratch, independent of solver internals.
ResidualReport residuals(const ConicProgram &prog, const ConicSolution &sol);

} // namespace cellfree::conic
