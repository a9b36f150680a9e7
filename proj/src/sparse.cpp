#include "chb/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace chb {

CsrMatrix CsrMatrix::from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("CsrMatrix: negative dimension");
    for (const auto& t : triplets)
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
            throw std::out_of_range("CsrMatrix: triplet index out of range");
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_offset.assign(rows + 1, 0);
    for (size_t k = 0; k < triplets.size();) {
        size_t e = k;
        double sum = 0.0;
        while (e < triplets.size() && triplets[e].row == triplets[k].row &&
               triplets[e].col == triplets[k].col)
            sum += triplets[e++].value;
        m.col_index.push_back(triplets[k].col);
        m.values.push_back(sum);
        m.row_offset[triplets[k].row + 1]++;
        k = e;
    }
    for (int r = 0; r < rows; ++r) m.row_offset[r + 1] += m.row_offset[r];
    return m;
}

CsrMatrix CsrMatrix::identity(int n) {
    std::vector<Triplet> t;
    t.reserve(n);
    for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
}

std::vector<double> CsrMatrix::apply(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cols)
        throw std::invalid_argument("CsrMatrix::apply: size mismatch");
    std::vector<double> y(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int k = row_offset[r]; k < row_offset[r + 1]; ++k)
            acc += values[k] * x[col_index[k]];
        y[r] = acc;
    }
    return y;
}

CsrMatrix CsrMatrix::transposed() const {
    std::vector<Triplet> t;
    t.reserve(values.size());
    for (int r = 0; r < rows; ++r)
        for (int k = row_offset[r]; k < row_offset[r + 1]; ++k)
            t.push_back({col_index[k], r, values[k]});
    return from_triplets(cols, rows, std::move(t));
}

CsrMatrix CsrMatrix::scaled(double s) const {
    CsrMatrix m = *this;
    for (double& v : m.values) v *= s;
    return m;
}

std::vector<std::vector<double>> CsrMatrix::to_dense() const {
    std::vector<std::vector<double>> d(rows, std::vector<double>(cols, 0.0));
    for (int r = 0; r < rows; ++r)
        for (int k = row_offset[r]; k < row_offset[r + 1]; ++k)
            d[r][col_index[k]] += values[k];
    return d;
}

double CsrMatrix::inf_norm() const {
    double norm = 0.0;
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int k = row_offset[r]; k < row_offset[r + 1]; ++k) s += std::abs(values[k]);
        norm = std::max(norm, s);
    }
    return norm;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

Eigen::SparseMatrix<double> to_eigen(const CsrMatrix& A) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(A.values.size());
    for (int r = 0; r < A.rows; ++r)
        for (int k = A.row_offset[r]; k < A.row_offset[r + 1]; ++k)
            t.emplace_back(r, A.col_index[k], A.values[k]);
    Eigen::SparseMatrix<double> m(A.rows, A.cols);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

}  // namespace

std::vector<double> solve_spd(const CsrMatrix& A, const std::vector<double>& b, double tol) {
    if (A.rows != A.cols) throw std::invalid_argument("solve_spd: matrix not square");
    if (static_cast<int>(b.size()) != A.rows)
        throw std::invalid_argument("solve_spd: rhs size mismatch");
    const int n = A.rows;
    const double bnorm = norm2(b);
    std::vector<double> x(n, 0.0);
    if (bnorm == 0.0) return x;

    std::vector<double> inv_diag(n, 0.0);
    for (int r = 0; r < n; ++r) {
        for (int k = A.row_offset[r]; k < A.row_offset[r + 1]; ++k)
            if (A.col_index[k] == r) inv_diag[r] = A.values[k];
        if (inv_diag[r] <= 0.0)
            throw SolveFailure("solve_spd: nonpositive diagonal at row " + std::to_string(r),
                               bnorm);
        inv_diag[r] = 1.0 / inv_diag[r];
    }

    std::vector<double> r = b, z(n), p(n), Ap;
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    const int max_iter = 40 * n + 1000;
    for (int it = 0; it < max_iter; ++it) {
        Ap = A.apply(p);
        const double pAp = dot(p, Ap);
        if (pAp <= 0.0)
            throw SolveFailure("solve_spd: matrix not positive definite (p'Ap <= 0)", norm2(r));
        const double alpha = rz / pAp;
        for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (int i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
        if (norm2(r) <= tol * bnorm) {
            // guard against drift of the recurrence residual
            std::vector<double> true_r = A.apply(x);
            for (int i = 0; i < n; ++i) true_r[i] = b[i] - true_r[i];
            if (norm2(true_r) <= 10.0 * tol * bnorm) return x;
            r = true_r;
        }
        for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_next = dot(r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw SolveFailure("solve_spd: no convergence within iteration cap, residual " +
                           std::to_string(norm2(r) / bnorm),
                       norm2(r));
}

struct ReusableLu::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> solver;
    bool analyzed = false;
    int n = 0;
};

ReusableLu::ReusableLu() : impl_(std::make_unique<Impl>()) {}
ReusableLu::~ReusableLu() = default;
ReusableLu::ReusableLu(ReusableLu&&) noexcept = default;
ReusableLu& ReusableLu::operator=(ReusableLu&&) noexcept = default;

void ReusableLu::factorize(const CsrMatrix& A) {
    if (A.rows != A.cols) throw std::invalid_argument("ReusableLu: matrix not square");
    Eigen::SparseMatrix<double> m = to_eigen(A);
    if (!impl_->analyzed || impl_->n != A.rows) {
        impl_->solver.analyzePattern(m);
        impl_->analyzed = true;
        impl_->n = A.rows;
    }
    impl_->solver.factorize(m);
    if (impl_->solver.info() != Eigen::Success)
        throw SolveFailure("sparse LU factorization failed (singular to working precision): " +
                               impl_->solver.lastErrorMessage(),
                           std::numeric_limits<double>::quiet_NaN());
}

std::vector<double> ReusableLu::solve(const std::vector<double>& b) const {
    if (!impl_->analyzed) throw std::logic_error("ReusableLu::solve before factorize");
    if (static_cast<int>(b.size()) != impl_->n)
        throw std::invalid_argument("ReusableLu::solve: rhs size mismatch");
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
    Eigen::VectorXd x = impl_->solver.solve(rhs);
    if (impl_->solver.info() != Eigen::Success)
        throw SolveFailure("sparse LU backsolve failed", std::numeric_limits<double>::quiet_NaN());
    return std::vector<double>(x.data(), x.data() + x.size());
}

std::vector<double> solve_general(const CsrMatrix& A, const std::vector<double>& b) {
    if (A.rows != A.cols) throw std::invalid_argument("solve_general: matrix not square");
    if (static_cast<int>(b.size()) != A.rows)
        throw std::invalid_argument("solve_general: rhs size mismatch");
    ReusableLu lu;
    lu.factorize(A);
    std::vector<double> x = lu.solve(b);
    std::vector<double> r = A.apply(x);
    for (size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
    const double bound = 1e-10 * (A.inf_norm() * max_abs(x) + max_abs(b));
    if (max_abs(r) > bound)
        throw SolveFailure("solve_general: residual " + std::to_string(max_abs(r)) +
                               " exceeds bound " + std::to_string(bound),
                           max_abs(r));
    return x;
}

BlockSystem::BlockSystem(std::vector<std::pair<std::string, int>> groups)
    : groups_(std::move(groups)) {
    for (const auto& [name, size] : groups_) {
        if (size < 0) throw std::invalid_argument("BlockSystem: negative group size");
        if (offset_.count(name)) throw std::invalid_argument("BlockSystem: duplicate group " + name);
        offset_[name] = total_;
        total_ += size;
    }
}

int BlockSystem::group_offset(const std::string& group) const {
    auto it = offset_.find(group);
    if (it == offset_.end()) throw std::invalid_argument("BlockSystem: unknown group " + group);
    return it->second;
}

int BlockSystem::group_size(const std::string& group) const {
    for (const auto& [name, size] : groups_)
        if (name == group) return size;
    throw std::invalid_argument("BlockSystem: unknown group " + group);
}

void BlockSystem::set_block(const std::string& row_group, const std::string& col_group,
                            CsrMatrix block) {
    if (block.rows != group_size(row_group) || block.cols != group_size(col_group))
        throw std::invalid_argument("BlockSystem: block (" + row_group + "," + col_group +
                                    ") has wrong shape");
    blocks_[{row_group, col_group}] = std::move(block);
}

void BlockSystem::set_rhs(const std::string& group, std::vector<double> rhs) {
    if (static_cast<int>(rhs.size()) != group_size(group))
        throw std::invalid_argument("BlockSystem: rhs for " + group + " has wrong size");
    rhs_[group] = std::move(rhs);
}

bool BlockSystem::has_block(const std::string& r, const std::string& c) const {
    return blocks_.count({r, c}) > 0;
}

void BlockSystem::require_blocks(
    const std::vector<std::pair<std::string, std::string>>& keys) const {
    for (const auto& key : keys)
        if (!blocks_.count(key))
            throw std::invalid_argument("BlockSystem: required block (" + key.first + "," +
                                        key.second + ") missing");
}

CsrMatrix BlockSystem::assemble_matrix() const {
    std::vector<Triplet> t;
    for (const auto& [key, block] : blocks_) {
        const int r0 = group_offset(key.first);
        const int c0 = group_offset(key.second);
        for (int r = 0; r < block.rows; ++r)
            for (int k = block.row_offset[r]; k < block.row_offset[r + 1]; ++k)
                t.push_back({r0 + r, c0 + block.col_index[k], block.values[k]});
    }
    return CsrMatrix::from_triplets(total_, total_, std::move(t));
}

std::vector<double> BlockSystem::assemble_rhs() const {
    std::vector<double> out(total_, 0.0);
    for (const auto& [group, rhs] : rhs_) {
        const int o = group_offset(group);
        for (size_t i = 0; i < rhs.size(); ++i) out[o + i] = rhs[i];
    }
    return out;
}

std::vector<double> BlockSystem::extract(const std::string& group,
                                         const std::vector<double>& full) const {
    if (static_cast<int>(full.size()) != total_)
        throw std::invalid_argument("BlockSystem::extract: vector size mismatch");
    const int o = group_offset(group);
    const int s = group_size(group);
    return std::vector<double>(full.begin() + o, full.begin() + o + s);
}

}  // namespace chb
