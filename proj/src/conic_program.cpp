#include "cellfree/conic.hpp"

#include "cellfree/errors.hpp"

#include <sstream>

namespace cellfree::conic {

std::string to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::Optimal:
        return "Optimal";
    case SolveStatus::Infeasible:
        return "Infeasible";
    case SolveStatus::Unbounded:
        return "Unbounded";
    case SolveStatus::IterLimit:
        return "IterLimit";
    case SolveStatus::NumericalTrouble:
        return "NumericalTrouble";
    }
    return "Unknown";
}

ConicProgram::ConicProgram(int n_vars) : n_vars_(n_vars), c_(Eigen::VectorXd::Zero(n_vars)) {
    if (n_vars < 1) {
        throw InvalidConfig("ConicProgram needs at least one variable");
    }
}

void ConicProgram::set_objective(const Eigen::VectorXd &c) {
    if (c.size() != n_vars_) {
        throw ShapeMismatch("objective length does not match variable count");
    }
    c_ = c;
}

int ConicProgram::add_block(ConeType type, int dim, std::string name) {
    if (dim < 1) {
        throw InvalidConfig("cone block needs dimension >= 1");
    }
    ConeBlock blk;
    blk.type = type;
    blk.dim = dim;
    blk.name = std::move(name);
    blk.offset = Eigen::VectorXd::Zero(dim);
    blocks_.push_back(std::move(blk));
    n_rows_ += dim;
    return static_cast<int>(blocks_.size()) - 1;
}

void ConicProgram::add_coeff(int block, int row, int var, double value) {
    ConeBlock &blk = blocks_.at(block);
    if (row < 0 || row >= blk.dim || var < 0 || var >= n_vars_) {
        throw ShapeMismatch("coefficient index out of range");
    }
    if (value != 0.0) {
        blk.coeffs.emplace_back(row, var, value);
    }
}

void ConicProgram::set_offset(int block, int row, double value) {
    ConeBlock &blk = blocks_.at(block);
    if (row < 0 || row >= blk.dim) {
        throw ShapeMismatch("offset index out of range");
    }
    blk.offset(row) = value;
}

Eigen::SparseMatrix<double> ConicProgram::affine_matrix() const {
    std::vector<Eigen::Triplet<double>> triplets;
    int row0 = 0;
    for (const ConeBlock &blk : blocks_) {
        for (const auto &t : blk.coeffs) {
            triplets.emplace_back(row0 + t.row(), t.col(), t.value());
        }
        row0 += blk.dim;
    }
    Eigen::SparseMatrix<double> F(n_rows_, n_vars_);
    F.setFromTriplets(triplets.begin(), triplets.end());
    return F;
}

Eigen::VectorXd ConicProgram::affine_offset() const {
    Eigen::VectorXd g(n_rows_);
    int row0 = 0;
    for (const ConeBlock &blk : blocks_) {
        g.segment(row0, blk.dim) = blk.offset;
        row0 += blk.dim;
    }
    return g;
}

std::string ConicProgram::dump() const {
    std::ostringstream out;
    out << "VER 1\n";
    out << "OBJSENSE\nMIN\n";
    out << "VAR " << n_vars_ << "\n";
    out << "OBJACOORD";
    for (int j = 0; j < n_vars_; ++j) {
        if (c_(j) != 0.0) {
            out << "\n" << j << " " << c_(j);
        }
    }
    out << "\n";
    int row0 = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const ConeBlock &blk = blocks_[b];
        out << "CON " << (blk.type == ConeType::Orthant ? "L+" : "Q") << " " << blk.dim;
        if (!blk.name.empty()) {
            out << " # " << blk.name;
        }
        out << "\n";
        for (const auto &t : blk.coeffs) {
            out << "A " << row0 + t.row() << " " << t.col() << " " << t.value() << "\n";
        }
        for (int r = 0; r < blk.dim; ++r) {
            if (blk.offset(r) != 0.0) {
                out << "B " << row0 + r << " " << blk.offset(r) << "\n";
            }
        }
        row0 += blk.dim;
    }
    return out.str();
}

namespace {

double cone_violation(ConeType type, const Eigen::VectorXd &y) {
    if (type == ConeType::Orthant || y.size() == 1) {
        return std::max(0.0, -y.minCoeff());
    }
    return std::max(0.0, y.tail(y.size() - 1).norm() - y(0));
}

} // namespace

ResidualReport residuals(const ConicProgram &prog, const ConicSolution &sol) {
    ResidualReport rep;
    const Eigen::VectorXd c = prog.objective();
    const auto &blocks = prog.blocks();

    if (sol.status == SolveStatus::Unbounded) {
        // x is an improving ray: c'x = -1, F x in K.
        if (sol.x.size() != prog.n_vars()) {
            throw ShapeMismatch("ray length does not match program");
        }
        double viol = 0.0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            Eigen::VectorXd y = Eigen::VectorXd::Zero(blocks[b].dim);
            for (const auto &t : blocks[b].coeffs) {
                y(t.row()) += t.value() * sol.x(t.col());
            }
            viol = std::max(viol, cone_violation(blocks[b].type, y));
        }
        rep.certificate = std::max(viol, std::abs(c.dot(sol.x) + 1.0));
        return rep;
    }

    if (sol.status == SolveStatus::Infeasible) {
        // duals hold an improving ray: g'z = -1, F'z = 0, z in K*.
        if (sol.duals.size() != blocks.size()) {
            throw ShapeMismatch("dual ray block count does not match program");
        }
        Eigen::VectorXd Ftz = Eigen::VectorXd::Zero(prog.n_vars());
        double gz = 0.0;
        double cone_viol = 0.0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const Eigen::VectorXd &z = sol.duals[b];
            if (z.size() != blocks[b].dim) {
                throw ShapeMismatch("dual ray size does not match block");
            }
            for (const auto &t : blocks[b].coeffs) {
                Ftz(t.col()) += t.value() * z(t.row());
            }
            gz += blocks[b].offset.dot(z);
            cone_viol = std::max(cone_viol, cone_violation(blocks[b].type, z));
        }
        rep.certificate = std::max({Ftz.lpNorm<Eigen::Infinity>(), cone_viol, std::abs(gz + 1.0)});
        return rep;
    }

    if (sol.x.size() != prog.n_vars()) {
        throw ShapeMismatch("solution length does not match program");
    }
    if (sol.duals.size() != blocks.size()) {
        throw ShapeMismatch("dual block count does not match program");
    }

    Eigen::VectorXd Ftz = Eigen::VectorXd::Zero(prog.n_vars());
    double gz = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const ConeBlock &blk = blocks[b];
        const Eigen::VectorXd &z = sol.duals[b];
        if (z.size() != blk.dim) {
            throw ShapeMismatch("dual size does not match block");
        }
        Eigen::VectorXd y = blk.offset;
        for (const auto &t : blk.coeffs) {
            y(t.row()) += t.value() * sol.x(t.col());
        }
        rep.primal_infeas = std::max(rep.primal_infeas, cone_violation(blk.type, y));
        rep.dual_cone_infeas = std::max(rep.dual_cone_infeas, cone_violation(blk.type, z));
        for (const auto &t : blk.coeffs) {
            Ftz(t.col()) += t.value() * z(t.row());
        }
        gz += blk.offset.dot(z);
    }
    rep.dual_infeas = (Ftz - c).norm();
    const double pobj = c.dot(sol.x);
    rep.abs_gap = pobj + gz; // dual objective is -g'z
    rep.rel_gap = std::abs(rep.abs_gap) / (1.0 + std::abs(pobj));
    return rep;
}

} // namespace cellfree::conic
