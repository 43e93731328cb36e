#include "cellfree/conic.hpp"
#include "cellfree/errors.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

// Primal-dual interior-point method for
//
//     minimize c'x  s.t.  Gx + s = h,  s in K,
//
// on the homogeneous self-dual embedding with Nesterov-Todd scalings and a
// Mehrotra predictor-corrector, in the style of the ECOS solver family.
// K is a product of a nonnegative orthant and second-order cones. The KKT
// systems carry the sparse SOC-scaling expansion (two extra rows per cone)
// plus static regularization, factored by a simplicial LDLT with a fixed
// symbolic pattern. Convergence is certified against residuals of the
// *original* (unequilibrated) data so that a reported Optimal status always
// survives independent re-verification.

namespace cellfree::conic {

namespace {

constexpr double kStepMin = 1e-6;
constexpr double kStepMax = 0.999;
constexpr double kGamma = 0.99;     // fraction-to-boundary
constexpr double kSigmaMin = 1e-4;
constexpr double kSigmaMax = 1.0;
constexpr double kSafeguardFactor = 500.0; // max tolerated primal-residual blowup
constexpr double kLinSysAcc = 1e-14;
constexpr double kIrErrFact = 6.0;

struct SocState {
    int dim = 0;
    int m_start = 0;   // first row in the stacked cone vector
    int exp_start = 0; // first row in the expanded (KKT) layout
    Eigen::VectorXd q; // dim-1
    double eta_sq = 1.0;
    double a = 0.0;
    double d1 = 1.0;
    double u0 = 0.0;
    double u1 = 0.0;
    double v1 = 0.0;
};

// Where each program block landed in the solver's row ordering.
struct BlockMap {
    int m_start = 0;
    int dim = 0;
};

double cone_violation_range(const Eigen::VectorXd &y, int start, int dim, bool soc) {
    if (!soc || dim == 1) {
        return std::max(0.0, -y.segment(start, dim).minCoeff());
    }
    return std::max(0.0, y.segment(start + 1, dim - 1).norm() - y(start));
}

class Workspace {
  public:
    Workspace(const ConicProgram &prog, const SolverOptions &opts) : prog_(prog), opts_(opts) {
        compile();
    }

    ConicSolution run();

  private:
    void compile();
    void equilibrate();
    void setup_kkt();
    void set_identity_scaling();
    bool update_scalings();
    void update_kkt_values();
    bool factorize();
    int solve_kkt(const Eigen::VectorXd &rhs, Eigen::VectorXd &dx, Eigen::VectorXd &dz);
    void apply_m33(const Eigen::VectorXd &x_exp, Eigen::VectorXd &y_exp) const;
    void scale(const Eigen::VectorXd &z, Eigen::VectorXd &lambda) const; // lambda = W z
    void conic_product(const Eigen::VectorXd &u, const Eigen::VectorXd &v, Eigen::VectorXd &w) const;
    void conic_division(const Eigen::VectorXd &u, const Eigen::VectorXd &w, Eigen::VectorXd &v) const;
    void bring_to_cone(const Eigen::VectorXd &r, Eigen::VectorXd &s) const;
    double line_search(const Eigen::VectorXd &lambda, const Eigen::VectorXd &ds,
                       const Eigen::VectorXd &dz, double tau, double dtau, double kap,
                       double dkap) const;
    void expand(const Eigen::VectorXd &v_m, Eigen::VectorXd &v_exp) const;

    // Exit-condition bookkeeping on original problem data.
    struct TrueResiduals {
        double pinf = std::numeric_limits<double>::infinity();
        double dinf = std::numeric_limits<double>::infinity();
        double gap = std::numeric_limits<double>::infinity();
        double rel_gap = std::numeric_limits<double>::infinity();
        double pobj = 0.0;
        double dobj = 0.0;
        double score() const { return std::max({pinf, dinf, rel_gap}); }
    };
    TrueResiduals true_residuals(const Eigen::VectorXd &x, const Eigen::VectorXd &z,
                                 double tau) const;
    double primal_cone_violation(const Eigen::VectorXd &y_m) const;

    ConicSolution package(SolveStatus status, const Eigen::VectorXd &x, const Eigen::VectorXd &z,
                          double tau) const;
    ConicSolution package_infeasible(const Eigen::VectorXd &z_ray) const;
    ConicSolution package_unbounded(const Eigen::VectorXd &x_ray) const;

    const ConicProgram &prog_;
    SolverOptions opts_;

    int n_ = 0;      // variables
    int m_ = 0;      // cone rows
    int l_ = 0;      // orthant rows
    int mtilde_ = 0; // expanded cone rows
    int dim_kkt_ = 0;

    Eigen::SparseMatrix<double> G0_; // original data, solver row order
    Eigen::VectorXd h0_, c0_;
    Eigen::SparseMatrix<double> G_, Gt_; // equilibrated
    Eigen::VectorXd h_, c_;
    Eigen::VectorXd x_equil_, g_equil_;

    std::vector<SocState> socs_;
    std::vector<BlockMap> block_map_;
    std::vector<bool> block_is_soc_;
    std::vector<int> exp_of_m_; // cone row -> expanded row

    Eigen::VectorXd lp_v_; // LP scaling W^2 diagonal
    double delta_ = 0.0;   // current static regularization

    Eigen::SparseMatrix<double> K_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Upper> ldlt_;
    bool pattern_analyzed_ = false;
    std::vector<int> xdiag_slots_, lp_slots_;
    struct SocSlots {
        std::vector<int> d, v, u;
        int exp1 = 0, exp2 = 0;
    };
    std::vector<SocSlots> soc_slots_;

    double norm_h_ = 0.0, norm_c_ = 0.0;

    // iterate
    Eigen::VectorXd x_, z_, s_, lambda_;
    double tau_ = 1.0, kap_ = 1.0;
};

void Workspace::compile() {
    n_ = prog_.n_vars();
    const auto &blocks = prog_.blocks();
    block_map_.resize(blocks.size());
    block_is_soc_.resize(blocks.size());

    // Orthant rows first (dimension-1 SOCs fold into the orthant), then SOCs.
    l_ = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        block_is_soc_[b] = blocks[b].type == ConeType::Soc && blocks[b].dim >= 2;
        if (!block_is_soc_[b]) {
            block_map_[b].m_start = l_;
            block_map_[b].dim = blocks[b].dim;
            l_ += blocks[b].dim;
        }
    }
    m_ = l_;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (block_is_soc_[b]) {
            SocState sc;
            sc.dim = blocks[b].dim;
            sc.m_start = m_;
            block_map_[b].m_start = m_;
            block_map_[b].dim = blocks[b].dim;
            m_ += blocks[b].dim;
            socs_.push_back(std::move(sc));
        }
    }
    mtilde_ = m_ + 2 * static_cast<int>(socs_.size());
    dim_kkt_ = n_ + mtilde_;

    exp_of_m_.resize(m_);
    for (int r = 0; r < l_; ++r) {
        exp_of_m_[r] = r;
    }
    int exp = l_;
    for (SocState &sc : socs_) {
        sc.exp_start = exp;
        for (int t = 0; t < sc.dim; ++t) {
            exp_of_m_[sc.m_start + t] = exp + t;
        }
        exp += sc.dim + 2;
    }

    // G = -F, h = g in the solver row order.
    std::vector<Eigen::Triplet<double>> trips;
    h0_.resize(m_);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const int r0 = block_map_[b].m_start;
        for (const auto &t : blocks[b].coeffs) {
            trips.emplace_back(r0 + t.row(), t.col(), -t.value());
        }
        h0_.segment(r0, blocks[b].dim) = blocks[b].offset;
    }
    G0_.resize(m_, n_);
    G0_.setFromTriplets(trips.begin(), trips.end());
    c0_ = prog_.objective();
    norm_h_ = m_ > 0 ? h0_.lpNorm<Eigen::Infinity>() : 0.0;
    norm_c_ = c0_.norm();

    G_ = G0_;
    h_ = h0_;
    c_ = c0_;
    equilibrate();
    Gt_ = G_.transpose();

    lp_v_ = Eigen::VectorXd::Ones(l_);
    delta_ = opts_.static_reg;
    setup_kkt();
}

void Workspace::equilibrate() {
    x_equil_ = Eigen::VectorXd::Ones(n_);
    g_equil_ = Eigen::VectorXd::Ones(m_);
    if (m_ == 0) {
        return;
    }
    for (int iter = 0; iter < opts_.equil_iters; ++iter) {
        Eigen::VectorXd col_max = Eigen::VectorXd::Zero(n_);
        Eigen::VectorXd row_max = Eigen::VectorXd::Zero(m_);
        for (int j = 0; j < G_.outerSize(); ++j) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(G_, j); it; ++it) {
                const double a = std::abs(it.value());
                col_max(j) = std::max(col_max(j), a);
                row_max(it.row()) = std::max(row_max(it.row()), a);
            }
        }
        // Rows of one SOC must share a scaling factor to preserve the cone.
        for (const SocState &sc : socs_) {
            const double total = row_max.segment(sc.m_start, sc.dim).sum();
            row_max.segment(sc.m_start, sc.dim).setConstant(total);
        }
        auto sqrt_or_one = [](double v) { return v < 1e-6 ? 1.0 : std::sqrt(v); };
        col_max = col_max.unaryExpr(sqrt_or_one);
        row_max = row_max.unaryExpr(sqrt_or_one);
        for (int j = 0; j < G_.outerSize(); ++j) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(G_, j); it; ++it) {
                it.valueRef() /= row_max(it.row()) * col_max(j);
            }
        }
        x_equil_ = x_equil_.cwiseProduct(col_max);
        g_equil_ = g_equil_.cwiseProduct(row_max);
    }
    c_ = c_.cwiseQuotient(x_equil_);
    h_ = h_.cwiseQuotient(g_equil_);
}

void Workspace::setup_kkt() {
    //      [ dI   G' ]
    //  K = [ G   -V  ]   (upper triangle stored)
    // with V the expanded NT scaling block: per SOC, diag(D) plus two extra
    // rows/cols carrying the low-rank u/v vectors.
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < n_; ++i) {
        trips.emplace_back(i, i, delta_);
    }
    // G' in the (1,2) block, columns laid out in expanded order.
    for (int j = 0; j < G_.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(G_, j); it; ++it) {
            trips.emplace_back(j, n_ + exp_of_m_[it.row()], it.value());
        }
    }
    for (int r = 0; r < l_; ++r) {
        trips.emplace_back(n_ + r, n_ + r, -1.0 - delta_);
    }
    for (const SocState &sc : socs_) {
        const int base = n_ + sc.exp_start;
        for (int t = 0; t < sc.dim; ++t) {
            trips.emplace_back(base + t, base + t, -1.0 - delta_);
        }
        const int p = base + sc.dim;
        trips.emplace_back(p, p, -1.0);
        for (int t = 1; t < sc.dim; ++t) {
            trips.emplace_back(base + t, p, 0.0);
        }
        trips.emplace_back(p + 1, p + 1, 1.0 + delta_);
        for (int t = 0; t < sc.dim; ++t) {
            trips.emplace_back(base + t, p + 1, 0.0);
        }
    }
    K_.resize(dim_kkt_, dim_kkt_);
    K_.setFromTriplets(trips.begin(), trips.end());
    K_.makeCompressed();

    auto slot = [this](int row, int col) {
        const int *outer = K_.outerIndexPtr();
        const int *inner = K_.innerIndexPtr();
        const int lo = outer[col], hi = outer[col + 1];
        const int *hit = std::lower_bound(inner + lo, inner + hi, row);
        return static_cast<int>(hit - inner);
    };
    xdiag_slots_.resize(n_);
    for (int i = 0; i < n_; ++i) {
        xdiag_slots_[i] = slot(i, i);
    }
    lp_slots_.resize(l_);
    for (int r = 0; r < l_; ++r) {
        lp_slots_[r] = slot(n_ + r, n_ + r);
    }
    soc_slots_.resize(socs_.size());
    for (std::size_t j = 0; j < socs_.size(); ++j) {
        const SocState &sc = socs_[j];
        SocSlots &ss = soc_slots_[j];
        const int base = n_ + sc.exp_start;
        const int p = base + sc.dim;
        ss.d.resize(sc.dim);
        for (int t = 0; t < sc.dim; ++t) {
            ss.d[t] = slot(base + t, base + t);
        }
        ss.exp1 = slot(p, p);
        ss.v.resize(sc.dim - 1);
        for (int t = 1; t < sc.dim; ++t) {
            ss.v[t - 1] = slot(base + t, p);
        }
        ss.exp2 = slot(p + 1, p + 1);
        ss.u.resize(sc.dim);
        for (int t = 0; t < sc.dim; ++t) {
            ss.u[t] = slot(base + t, p + 1);
        }
    }
}

void Workspace::set_identity_scaling() {
    lp_v_.setOnes();
    for (SocState &sc : socs_) {
        sc.q = Eigen::VectorXd::Zero(sc.dim - 1);
        sc.eta_sq = 1.0;
        sc.a = 1.0;
        sc.d1 = 1.0;
        sc.u0 = 0.0;
        sc.u1 = 0.0;
        sc.v1 = 0.0;
    }
    update_kkt_values();
}

bool Workspace::update_scalings() {
    lp_v_ = s_.head(l_).cwiseQuotient(z_.head(l_));
    for (SocState &sc : socs_) {
        const int i0 = sc.m_start;
        const double sres =
            s_(i0) * s_(i0) - s_.segment(i0 + 1, sc.dim - 1).squaredNorm();
        const double zres =
            z_(i0) * z_(i0) - z_.segment(i0 + 1, sc.dim - 1).squaredNorm();
        if (sres <= 0.0 || zres <= 0.0) {
            return false;
        }
        const double snorm = std::sqrt(sres);
        const double znorm = std::sqrt(zres);
        const Eigen::VectorXd skbar = s_.segment(i0, sc.dim) / snorm;
        const Eigen::VectorXd zkbar = z_.segment(i0, sc.dim) / znorm;
        sc.eta_sq = snorm / znorm;

        double gamma = std::sqrt(0.5 * (1.0 + skbar.dot(zkbar)));
        const double a = (0.5 / gamma) * (skbar(0) + zkbar(0));
        sc.q = (0.5 / gamma) * (skbar.tail(sc.dim - 1) - zkbar.tail(sc.dim - 1));
        const double w = sc.q.squaredNorm();

        const double cc = (1.0 + a) + w / (1.0 + a);
        const double dd = 1.0 + 2.0 / (1.0 + a) + w / ((1.0 + a) * (1.0 + a));
        const double d1 =
            std::max(0.0, 0.5 * (a * a + w * (1.0 - (cc * cc) / (1.0 + w * dd))));
        const double u0_sq = a * a + w - d1;
        const double c2byu02 = (cc * cc) / u0_sq;
        if (c2byu02 - dd <= 0.0) {
            return false;
        }
        sc.d1 = d1;
        sc.u0 = std::sqrt(u0_sq);
        sc.u1 = std::sqrt(c2byu02);
        sc.v1 = std::sqrt(c2byu02 - dd);
        sc.a = a;
    }
    scale(z_, lambda_);
    return true;
}

void Workspace::update_kkt_values() {
    double *vals = K_.valuePtr();
    for (int i = 0; i < n_; ++i) {
        vals[xdiag_slots_[i]] = delta_;
    }
    for (int r = 0; r < l_; ++r) {
        vals[lp_slots_[r]] = -lp_v_(r) - delta_;
    }
    for (std::size_t j = 0; j < socs_.size(); ++j) {
        const SocState &sc = socs_[j];
        const SocSlots &ss = soc_slots_[j];
        vals[ss.d[0]] = -sc.eta_sq * sc.d1 - delta_;
        for (int t = 1; t < sc.dim; ++t) {
            vals[ss.d[t]] = -sc.eta_sq - delta_;
        }
        vals[ss.exp1] = -sc.eta_sq;
        for (int t = 1; t < sc.dim; ++t) {
            vals[ss.v[t - 1]] = -sc.eta_sq * sc.v1 * sc.q(t - 1);
        }
        vals[ss.exp2] = sc.eta_sq + delta_;
        vals[ss.u[0]] = -sc.eta_sq * sc.u0;
        for (int t = 1; t < sc.dim; ++t) {
            vals[ss.u[t]] = -sc.eta_sq * sc.u1 * sc.q(t - 1);
        }
    }
}

bool Workspace::factorize() {
    for (int attempt = 0; attempt < 4; ++attempt) {
        if (!pattern_analyzed_) {
            ldlt_.analyzePattern(K_);
            pattern_analyzed_ = true;
        }
        ldlt_.factorize(K_);
        if (ldlt_.info() == Eigen::Success) {
            return true;
        }
        // Dynamic regularization: bump and refresh the scaling entries.
        delta_ *= 100.0;
        update_kkt_values();
    }
    return false;
}

// y_exp = M33 * x_exp where M33 is the assembled (2,2) block (negative
// scaling block with regularization and SOC expansion), used by iterative
// refinement so that the residual operator matches the factored matrix.
void Workspace::apply_m33(const Eigen::VectorXd &x_exp, Eigen::VectorXd &y_exp) const {
    y_exp.resize(mtilde_);
    y_exp.head(l_) = -((lp_v_.array() + delta_) * x_exp.head(l_).array()).matrix();
    for (const SocState &sc : socs_) {
        const int b = sc.exp_start;
        const int p = b + sc.dim;
        const auto x_tail = x_exp.segment(b + 1, sc.dim - 1);
        const double qtx = sc.dim > 1 ? sc.q.dot(x_tail) : 0.0;
        y_exp(b) = -(sc.eta_sq * sc.d1 + delta_) * x_exp(b) - sc.eta_sq * sc.u0 * x_exp(p + 1);
        y_exp.segment(b + 1, sc.dim - 1) =
            -(sc.eta_sq + delta_) * x_tail -
            sc.eta_sq * (sc.v1 * x_exp(p) + sc.u1 * x_exp(p + 1)) * sc.q;
        y_exp(p) = -sc.eta_sq * sc.v1 * qtx - sc.eta_sq * x_exp(p);
        y_exp(p + 1) = -sc.eta_sq * sc.u0 * x_exp(b) - sc.eta_sq * sc.u1 * qtx +
                       (sc.eta_sq + delta_) * x_exp(p + 1);
    }
}

void Workspace::expand(const Eigen::VectorXd &v_m, Eigen::VectorXd &v_exp) const {
    v_exp.setZero(mtilde_);
    v_exp.head(l_) = v_m.head(l_);
    for (const SocState &sc : socs_) {
        v_exp.segment(sc.exp_start, sc.dim) = v_m.segment(sc.m_start, sc.dim);
    }
}

int Workspace::solve_kkt(const Eigen::VectorXd &rhs, Eigen::VectorXd &dx, Eigen::VectorXd &dz) {
    Eigen::VectorXd sol = ldlt_.solve(rhs);
    const double err_thresh = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * kLinSysAcc;
    double prev_err = std::numeric_limits<double>::max();
    Eigen::VectorXd correction(dim_kkt_);

    const auto bx = rhs.head(n_);
    const auto bz = rhs.tail(mtilde_);

    int it = 0;
    for (it = 0; it <= opts_.refine_iters; ++it) {
        // Residual of the unexpanded-but-regularized system.
        const auto dx_cur = sol.head(n_);
        const auto dz_exp = sol.tail(mtilde_);
        Eigen::VectorXd dz_m(m_);
        dz_m.head(l_) = dz_exp.head(l_);
        for (const SocState &sc : socs_) {
            dz_m.segment(sc.m_start, sc.dim) = dz_exp.segment(sc.exp_start, sc.dim);
        }

        Eigen::VectorXd ex = bx - Gt_ * dz_m - delta_ * dx_cur;
        Eigen::VectorXd Gdx_m = G_ * dx_cur;
        Eigen::VectorXd Gdx_exp;
        expand(Gdx_m, Gdx_exp);
        Eigen::VectorXd m33dz;
        apply_m33(dz_exp, m33dz);
        Eigen::VectorXd ez = bz - Gdx_exp - m33dz;

        const double err = std::max(ex.lpNorm<Eigen::Infinity>(), ez.lpNorm<Eigen::Infinity>());
        if (it > 0 && err > prev_err) {
            sol -= correction;
            --it;
            break;
        }
        if (it == opts_.refine_iters || err < err_thresh ||
            (it > 0 && prev_err < kIrErrFact * err)) {
            break;
        }
        prev_err = err;
        Eigen::VectorXd e(dim_kkt_);
        e << ex, ez;
        correction = ldlt_.solve(e);
        sol += correction;
    }

    dx = sol.head(n_);
    dz.resize(m_);
    const auto dz_exp = sol.tail(mtilde_);
    dz.head(l_) = dz_exp.head(l_);
    for (const SocState &sc : socs_) {
        dz.segment(sc.m_start, sc.dim) = dz_exp.segment(sc.exp_start, sc.dim);
    }
    return it;
}

void Workspace::scale(const Eigen::VectorXd &z, Eigen::VectorXd &lambda) const {
    lambda.resize(m_);
    lambda.head(l_) = lp_v_.cwiseSqrt().cwiseProduct(z.head(l_));
    for (const SocState &sc : socs_) {
        const int i0 = sc.m_start;
        const double eta = std::sqrt(sc.eta_sq);
        const double zeta = sc.q.dot(z.segment(i0 + 1, sc.dim - 1));
        const double factor = z(i0) + zeta / (1.0 + sc.a);
        lambda(i0) = eta * (sc.a * z(i0) + zeta);
        lambda.segment(i0 + 1, sc.dim - 1) =
            eta * (z.segment(i0 + 1, sc.dim - 1) + factor * sc.q);
    }
}

void Workspace::conic_product(const Eigen::VectorXd &u, const Eigen::VectorXd &v,
                              Eigen::VectorXd &w) const {
    w.resize(m_);
    w.head(l_) = u.head(l_).cwiseProduct(v.head(l_));
    for (const SocState &sc : socs_) {
        const int i0 = sc.m_start;
        w(i0) = u.segment(i0, sc.dim).dot(v.segment(i0, sc.dim));
        w.segment(i0 + 1, sc.dim - 1) = u(i0) * v.segment(i0 + 1, sc.dim - 1) +
                                        v(i0) * u.segment(i0 + 1, sc.dim - 1);
    }
}

void Workspace::conic_division(const Eigen::VectorXd &u, const Eigen::VectorXd &w,
                               Eigen::VectorXd &v) const {
    v.resize(m_);
    v.head(l_) = w.head(l_).cwiseQuotient(u.head(l_));
    for (const SocState &sc : socs_) {
        const int i0 = sc.m_start;
        const double u0 = u(i0);
        const double w0 = w(i0);
        const auto u_tail = u.segment(i0 + 1, sc.dim - 1);
        const auto w_tail = w.segment(i0 + 1, sc.dim - 1);
        const double rho = u0 * u0 - u_tail.squaredNorm();
        const double zeta = u_tail.dot(w_tail);
        const double factor = (zeta / u0 - w0) / rho;
        v(i0) = (u0 * w0 - zeta) / rho;
        v.segment(i0 + 1, sc.dim - 1) = factor * u_tail + w_tail / u0;
    }
}

void Workspace::bring_to_cone(const Eigen::VectorXd &r, Eigen::VectorXd &s) const {
    double alpha = -kGamma;
    for (int i = 0; i < l_; ++i) {
        if (r(i) <= 0.0 && -r(i) > alpha) {
            alpha = -r(i);
        }
    }
    for (const SocState &sc : socs_) {
        const double res = r(sc.m_start) - r.segment(sc.m_start + 1, sc.dim - 1).norm();
        if (res <= 0.0 && -res > alpha) {
            alpha = -res;
        }
    }
    alpha += 1.0;
    s = r;
    s.head(l_).array() += alpha;
    for (const SocState &sc : socs_) {
        s(sc.m_start) += alpha;
    }
}

double Workspace::line_search(const Eigen::VectorXd &lambda, const Eigen::VectorXd &ds,
                              const Eigen::VectorXd &dz, double tau, double dtau, double kap,
                              double dkap) const {
    double alpha;
    if (l_ > 0) {
        const double rho_min = (ds.head(l_).cwiseQuotient(lambda.head(l_))).minCoeff();
        const double sig_min = (dz.head(l_).cwiseQuotient(lambda.head(l_))).minCoeff();
        const double eps = 1e-13;
        if (-sig_min > -rho_min) {
            alpha = sig_min < 0.0 ? 1.0 / (-sig_min) : 1.0 / eps;
        } else {
            alpha = rho_min < 0.0 ? 1.0 / (-rho_min) : 1.0 / eps;
        }
    } else {
        alpha = 10.0;
    }

    const double t_limit = -tau / dtau;
    const double k_limit = -kap / dkap;
    if (t_limit > 0.0 && t_limit < alpha) {
        alpha = t_limit;
    }
    if (k_limit > 0.0 && k_limit < alpha) {
        alpha = k_limit;
    }

    for (const SocState &sc : socs_) {
        const int i0 = sc.m_start;
        const double lk_sq =
            lambda(i0) * lambda(i0) - lambda.segment(i0 + 1, sc.dim - 1).squaredNorm();
        if (lk_sq <= 0.0) {
            continue;
        }
        const double lknorm = std::sqrt(lk_sq);
        const Eigen::VectorXd lkbar = lambda.segment(i0, sc.dim) / lknorm;
        const double lknorminv = 1.0 / lknorm;

        const double lk_ds = lkbar(0) * ds(i0) -
                             lkbar.tail(sc.dim - 1).dot(ds.segment(i0 + 1, sc.dim - 1));
        const double lk_dz = lkbar(0) * dz(i0) -
                             lkbar.tail(sc.dim - 1).dot(dz.segment(i0 + 1, sc.dim - 1));

        double factor = (lk_ds + ds(i0)) / (lkbar(0) + 1.0);
        const double rho0 = lknorminv * lk_ds;
        const double rho_tail_norm =
            (lknorminv *
             (ds.segment(i0 + 1, sc.dim - 1) - factor * lkbar.tail(sc.dim - 1)))
                .norm();
        const double rhonorm = rho_tail_norm - rho0;

        factor = (lk_dz + dz(i0)) / (lkbar(0) + 1.0);
        const double sig0 = lknorminv * lk_dz;
        const double sig_tail_norm =
            (lknorminv *
             (dz.segment(i0 + 1, sc.dim - 1) - factor * lkbar.tail(sc.dim - 1)))
                .norm();
        const double signorm = sig_tail_norm - sig0;

        const double conic_step = std::max({0.0, rhonorm, signorm});
        if (conic_step != 0.0) {
            alpha = std::min(alpha, 1.0 / conic_step);
        }
    }
    return std::clamp(alpha, kStepMin, kStepMax);
}

Workspace::TrueResiduals Workspace::true_residuals(const Eigen::VectorXd &x,
                                                   const Eigen::VectorXd &z, double tau) const {
    TrueResiduals res;
    const Eigen::VectorXd xt = x.cwiseQuotient(x_equil_) / tau;
    const Eigen::VectorXd zt = z.cwiseQuotient(g_equil_) / tau;
    const Eigen::VectorXd y = h0_ - G0_ * xt;
    res.pinf = primal_cone_violation(y);
    res.dinf = (G0_.transpose() * zt + c0_).norm();
    res.pobj = c0_.dot(xt);
    res.dobj = -h0_.dot(zt);
    res.gap = res.pobj - res.dobj;
    res.rel_gap = std::abs(res.gap) / (1.0 + std::abs(res.pobj));
    return res;
}

double Workspace::primal_cone_violation(const Eigen::VectorXd &y_m) const {
    double viol = l_ > 0 ? std::max(0.0, -y_m.head(l_).minCoeff()) : 0.0;
    for (const SocState &sc : socs_) {
        viol = std::max(viol, cone_violation_range(y_m, sc.m_start, sc.dim, true));
    }
    return viol;
}

ConicSolution Workspace::package(SolveStatus status, const Eigen::VectorXd &x,
                                 const Eigen::VectorXd &z, double tau) const {
    ConicSolution sol;
    sol.status = status;
    sol.x = x.cwiseQuotient(x_equil_) / tau;
    const Eigen::VectorXd zt = z.cwiseQuotient(g_equil_) / tau;
    sol.duals.resize(block_map_.size());
    for (std::size_t b = 0; b < block_map_.size(); ++b) {
        sol.duals[b] = zt.segment(block_map_[b].m_start, block_map_[b].dim);
    }
    sol.primal_objective = c0_.dot(sol.x);
    sol.dual_objective = -h0_.dot(zt);
    return sol;
}

ConicSolution Workspace::package_infeasible(const Eigen::VectorXd &z_ray) const {
    ConicSolution sol;
    sol.status = SolveStatus::Infeasible;
    sol.x = Eigen::VectorXd::Zero(n_);
    sol.duals.resize(block_map_.size());
    for (std::size_t b = 0; b < block_map_.size(); ++b) {
        sol.duals[b] = z_ray.segment(block_map_[b].m_start, block_map_[b].dim);
    }
    return sol;
}

ConicSolution Workspace::package_unbounded(const Eigen::VectorXd &x_ray) const {
    ConicSolution sol;
    sol.status = SolveStatus::Unbounded;
    sol.x = x_ray;
    sol.primal_objective = -std::numeric_limits<double>::infinity();
    return sol;
}

ConicSolution Workspace::run() {
    // Degenerate program with no constraint rows.
    if (m_ == 0) {
        ConicSolution sol;
        if (norm_c_ == 0.0) {
            sol.status = SolveStatus::Optimal;
            sol.x = Eigen::VectorXd::Zero(n_);
        } else {
            sol.status = SolveStatus::Unbounded;
            sol.x = -c0_ / norm_c_;
            sol.primal_objective = -std::numeric_limits<double>::infinity();
        }
        return sol;
    }

    const double feas_tol_p = opts_.feas_tol * (1.0 + norm_h_);
    const double feas_tol_d = opts_.feas_tol * (1.0 + norm_c_);

    set_identity_scaling();
    if (!factorize()) {
        ConicSolution sol;
        sol.status = SolveStatus::NumericalTrouble;
        sol.x = Eigen::VectorXd::Zero(n_);
        return sol;
    }

    // Initial point from two KKT solves, pushed into the cone interior.
    Eigen::VectorXd rhs1(dim_kkt_), rhs2(dim_kkt_);
    rhs1.setZero();
    {
        Eigen::VectorXd h_exp;
        expand(h_, h_exp);
        rhs1.tail(mtilde_) = h_exp;
    }
    rhs2.setZero();
    rhs2.head(n_) = -c_;

    Eigen::VectorXd dx1(n_), dz1(m_), dx2(n_), dz2(m_);
    solve_kkt(rhs1, dx1, dz1);
    x_ = dx1;
    bring_to_cone(-dz1, s_);
    solve_kkt(rhs2, dx2, dz2);
    bring_to_cone(dz2, z_);
    tau_ = 1.0;
    kap_ = 1.0;
    rhs1.head(n_) = -c_;

    lambda_.resize(m_);

    const double resx0 = std::max(1.0, c_.norm());
    const double resz0 = std::max(1.0, h_.norm());

    Eigen::VectorXd rx(n_), rz(m_);
    double pres_prev = std::numeric_limits<double>::max();

    struct Best {
        Eigen::VectorXd x, z;
        double tau = 1.0;
        double score = std::numeric_limits<double>::max();
        int iter = 0;
    } best;

    SolveStatus status = SolveStatus::IterLimit;
    int iter = 0;
    bool have_candidate = false;

    for (iter = 0; iter <= opts_.max_iters; ++iter) {
        // Residuals of the homogeneous embedding (equilibrated data).
        rx = -(Gt_ * z_) - tau_ * c_;
        rz = s_ + G_ * x_ - tau_ * h_;
        const double cx = c_.dot(x_);
        const double hz = h_.dot(z_);
        const double rt = kap_ + cx + hz;

        const double nx = x_.norm(), nz = z_.norm(), ns = s_.norm();
        const double pres = rz.norm() / std::max(1.0, resz0 + nx + ns) / tau_;
        const double dres = rx.norm() / std::max(1.0, resx0 + nz) / tau_;
        const double scaled_gap = s_.dot(z_);
        const double mu = (scaled_gap + kap_ * tau_) / (l_ + static_cast<int>(socs_.size()) + 1);

        const TrueResiduals tr = true_residuals(x_, z_, tau_);
        if (opts_.verbose) {
            std::printf("it %3d  pobj %+.6e  gap %8.1e  pinf %8.1e  dinf %8.1e  k/t %8.1e\n",
                        iter, tr.pobj, tr.gap, tr.pinf, tr.dinf, kap_ / tau_);
        }

        if (tr.score() < best.score) {
            best = {x_, z_, tau_, tr.score(), iter};
        }
        have_candidate = true;

        // Optimality, certified on the original data.
        if (tr.pinf <= feas_tol_p && tr.dinf <= feas_tol_d &&
            (std::abs(tr.gap) <= opts_.abs_gap_tol || tr.rel_gap <= opts_.rel_gap_tol)) {
            status = SolveStatus::Optimal;
            break;
        }

        // Primal infeasibility: dual ray with g'z -> -1, F'z -> 0. The
        // certificate residual is held to an absolute tolerance; a ray whose
        // residual only looks small relative to a huge ray norm proves
        // nothing (near-boundary feasible problems produce exactly those).
        const double cert_tol = 10.0 * opts_.feas_tol;
        if (tau_ < kap_) {
            const Eigen::VectorXd z_ray = z_.cwiseQuotient(g_equil_);
            const double hz_ray = h0_.dot(z_ray);
            if (hz_ray < -1e-12) {
                const Eigen::VectorXd zn = z_ray / (-hz_ray);
                const double cert = (G0_.transpose() * zn).lpNorm<Eigen::Infinity>();
                if (cert <= cert_tol) {
                    return package_infeasible(zn);
                }
            }
            const Eigen::VectorXd x_ray = x_.cwiseQuotient(x_equil_);
            const double cx_ray = c0_.dot(x_ray);
            if (cx_ray < -1e-12) {
                const Eigen::VectorXd xn = x_ray / (-cx_ray);
                const double viol = primal_cone_violation(-(G0_ * xn));
                if (viol <= cert_tol) {
                    return package_unbounded(xn);
                }
            }
        }

        if (iter == opts_.max_iters) {
            status = SolveStatus::IterLimit;
            break;
        }
        if (iter > 0 && (pres > kSafeguardFactor * pres_prev || scaled_gap < 0.0)) {
            status = SolveStatus::NumericalTrouble;
            break;
        }
        if (std::isnan(rt) || std::isnan(scaled_gap)) {
            status = SolveStatus::NumericalTrouble;
            break;
        }
        pres_prev = pres;

        if (!update_scalings()) {
            status = SolveStatus::NumericalTrouble;
            break;
        }
        update_kkt_values();
        if (!factorize()) {
            status = SolveStatus::NumericalTrouble;
            break;
        }

        solve_kkt(rhs1, dx1, dz1);

        // Affine (predictor) direction.
        Eigen::VectorXd rhs_aff(dim_kkt_);
        rhs_aff.head(n_) = rx;
        {
            Eigen::VectorXd cone_part(m_);
            cone_part = s_ - rz;
            Eigen::VectorXd cone_exp;
            expand(cone_part, cone_exp);
            rhs_aff.tail(mtilde_) = cone_exp;
        }
        solve_kkt(rhs_aff, dx2, dz2);

        const double dtau_denom = kap_ / tau_ - c_.dot(dx1) - h_.dot(dz1);
        const double dtau_aff = (rt - kap_ + c_.dot(dx2) + h_.dot(dz2)) / dtau_denom;

        dz2 += dtau_aff * dz1;
        Eigen::VectorXd w_dzaff(m_);
        scale(dz2, w_dzaff);
        Eigen::VectorXd ds_by_w = -w_dzaff - lambda_;
        const double dkap_aff = -kap_ - kap_ / tau_ * dtau_aff;

        const double step_aff =
            line_search(lambda_, ds_by_w, w_dzaff, tau_, dtau_aff, kap_, dkap_aff);
        const double sigma =
            std::clamp((1.0 - step_aff) * (1.0 - step_aff) * (1.0 - step_aff), kSigmaMin,
                       kSigmaMax);

        // Combined (corrector) direction.
        Eigen::VectorXd ds1(m_), ds2(m_);
        conic_product(lambda_, lambda_, ds1);
        conic_product(ds_by_w, w_dzaff, ds2);
        const double sigmamu = sigma * mu;
        ds1 += ds2;
        ds1.head(l_).array() -= sigmamu;
        for (const SocState &sc : socs_) {
            ds1(sc.m_start) -= sigmamu;
        }
        conic_division(lambda_, ds1, ds_by_w);
        scale(ds_by_w, ds1); // ds1 = W (lambda \ ds)

        const double one_minus_sigma = 1.0 - sigma;
        Eigen::VectorXd rhs_comb(dim_kkt_);
        rhs_comb.head(n_) = one_minus_sigma * rx;
        {
            Eigen::VectorXd cone_part = -one_minus_sigma * rz + ds1;
            Eigen::VectorXd cone_exp;
            expand(cone_part, cone_exp);
            rhs_comb.tail(mtilde_) = cone_exp;
        }
        solve_kkt(rhs_comb, dx2, dz2);

        const double bkap = kap_ * tau_ + dkap_aff * dtau_aff - sigmamu;
        const double dtau = (one_minus_sigma * rt - bkap / tau_ + c_.dot(dx2) + h_.dot(dz2)) /
                            dtau_denom;
        dx2 += dtau * dx1;
        dz2 += dtau * dz1;

        scale(dz2, w_dzaff);
        ds_by_w = -(ds_by_w + w_dzaff);
        const double dkap = -(bkap + kap_ * dtau) / tau_;

        const double step =
            kGamma * line_search(lambda_, ds_by_w, w_dzaff, tau_, dtau, kap_, dkap);
        Eigen::VectorXd ds(m_);
        scale(ds_by_w, ds);

        x_ += step * dx2;
        z_ += step * dz2;
        s_ += step * ds;
        kap_ += step * dkap;
        tau_ += step * dtau;

        if (step <= kStepMin * kGamma * 1.0000001) {
            status = SolveStatus::NumericalTrouble;
            ++iter;
            break;
        }
    }

    // On non-optimal exits fall back to the best iterate seen and re-test it.
    Eigen::VectorXd x_fin = x_, z_fin = z_;
    double tau_fin = tau_;
    if (status != SolveStatus::Optimal && have_candidate && best.score < true_residuals(x_, z_, tau_).score()) {
        x_fin = best.x;
        z_fin = best.z;
        tau_fin = best.tau;
    }
    const TrueResiduals tr = true_residuals(x_fin, z_fin, tau_fin);
    if (tr.pinf <= feas_tol_p && tr.dinf <= feas_tol_d &&
        (std::abs(tr.gap) <= opts_.abs_gap_tol || tr.rel_gap <= opts_.rel_gap_tol)) {
        status = SolveStatus::Optimal;
    }

    ConicSolution sol = package(status, x_fin, z_fin, tau_fin);
    sol.iterations = iter;
    sol.residuals = residuals(prog_, sol);
    return sol;
}

} // namespace

ConicSolution InteriorPointSolver::solve(const ConicProgram &prog,
                                         const SolverOptions &opts) const {
    Workspace ws(prog, opts);
    ConicSolution sol = ws.run();
    if (sol.status == SolveStatus::Infeasible || sol.status == SolveStatus::Unbounded) {
        sol.residuals = residuals(prog, sol);
    }
    return sol;
}

ConicSolution solve(const ConicProgram &prog, const SolverOptions &opts) {
    return InteriorPointSolver{}.solve(prog, opts);
}

} // namespace cellfree::conic
