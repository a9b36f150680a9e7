#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace chb {

struct Triplet {
    int row, col;
    double value;
};

// Compressed sparse row matrix; within each row columns are strictly
// increasing, duplicates merged at construction.
struct CsrMatrix {
    int rows = 0, cols = 0;
    std::vector<int> row_offset;  // size rows+1
    std::vector<int> col_index;
    std::vector<double> values;

    static CsrMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);
    static CsrMatrix identity(int n);

    int nnz() const { return static_cast<int>(values.size()); }
    std::vector<double> apply(const std::vector<double>& x) const;
    CsrMatrix transposed() const;
    CsrMatrix scaled(double s) const;
    std::vector<std::vector<double>> to_dense() const;
    double inf_norm() const;  // max absolute row sum
};

struct SolveFailure : std::runtime_error {
    double residual;
    SolveFailure(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

// Jacobi-preconditioned conjugate gradients, fixed iteration order, zero
// initial guess; converged when ||Ax-b|| <= tol * ||b|| (exit ||b||=0 -> 0).
std::vector<double> solve_spd(const CsrMatrix& A, const std::vector<double>& b,
                              double tol = 1e-12);

// Direct sparse LU with partial pivoting. Throws on singularity; the computed
// solution satisfies ||Ax-b|| <= 1e-10 * (||A||*||x|| + ||b||) in max norms.
std::vector<double> solve_general(const CsrMatrix& A, const std::vector<double>& b);

// Reusable LU for repeated solves with a fixed sparsity pattern: the symbolic
// analysis is done once, numeric factorization per call.
class ReusableLu {
  public:
    ReusableLu();
    ~ReusableLu();
    ReusableLu(ReusableLu&&) noexcept;
    ReusableLu& operator=(ReusableLu&&) noexcept;

    void factorize(const CsrMatrix& A);  // analyzes pattern on first call
    std::vector<double> solve(const std::vector<double>& b) const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Square block system over named dof groups. Blocks not set are zero; the
// caller may require specific blocks to be present before assembly.
class BlockSystem {
  public:
    explicit BlockSystem(std::vector<std::pair<std::string, int>> groups);

    void set_block(const std::string& row_group, const std::string& col_group, CsrMatrix block);
    void set_rhs(const std::string& group, std::vector<double> rhs);

    int group_offset(const std::string& group) const;
    int group_size(const std::string& group) const;
    int total_size() const { return total_; }

    bool has_block(const std::string& r, const std::string& c) const;
    void require_blocks(const std::vector<std::pair<std::string, std::string>>& keys) const;

    CsrMatrix assemble_matrix() const;
    std::vector<double> assemble_rhs() const;
    std::vector<double> extract(const std::string& group, const std::vector<double>& full) const;

  private:
    std::vector<std::pair<std::string, int>> groups_;
    std::map<std::string, int> offset_;
    std::map<std::pair<std::string, std::string>, CsrMatrix> blocks_;
    std::map<std::string, std::vector<double>> rhs_;
    int total_ = 0;
};

}  // namespace chb
