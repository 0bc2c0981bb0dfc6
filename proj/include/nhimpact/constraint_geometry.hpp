#pragma once

// Dense small-matrix numerics for velocity constraints and impacts: kernels
// of constraint operators, the projector that is orthogonal in the
// kinetic-energy metric, and the impact map R = I - (1 + mu) P.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <optional>

namespace nhimpact
{

inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr double kDefaultSpdTol = 1e-12;
inline constexpr double kDefaultNestingTol = 1e-10;
inline constexpr double kDefaultAdmissibilityTol = 1e-9;

/// Kinetic-energy metric G: symmetric positive definite, T(v) = v^T G v / 2.
///
/// The input is symmetrized on construction; an input whose asymmetry
/// exceeds spd_tol * max|G| or whose smallest eigenvalue is not above
/// spd_tol * largest is rejected with ErrorKind::InvalidMetric. The
/// Cholesky factor is kept for solves.
class Metric
{
public:
  explicit Metric(const Eigen::MatrixXd& entries, double spd_tol = kDefaultSpdTol);

  static Metric identity(Eigen::Index n);

  Eigen::Index dim() const { return entries_.rows(); }
  const Eigen::MatrixXd& matrix() const { return entries_; }

  // G^{-1} rhs via the stored Cholesky factor.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

private:
  Eigen::MatrixXd entries_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Full-row-rank constraint operator (the A or B of a velocity distribution).
/// Zero rows is allowed and means "no constraint": its kernel is everything.
class ConstraintMatrix
{
public:
  explicit ConstraintMatrix(const Eigen::MatrixXd& entries, double rank_tol = kDefaultRankTol);

  static ConstraintMatrix empty(Eigen::Index cols);

  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  bool is_empty() const { return entries_.rows() == 0; }
  double rank_tol() const { return rank_tol_; }
  const Eigen::MatrixXd& matrix() const { return entries_; }

private:
  ConstraintMatrix(Eigen::MatrixXd entries, double rank_tol, bool /*unchecked*/);

  Eigen::MatrixXd entries_;
  double rank_tol_;
};

/// Orthonormal basis (columns of Z) of the kernel of a constraint matrix.
struct KernelBasis
{
  Eigen::MatrixXd basis;

  Eigen::Index dim() const { return basis.cols(); }
};

/// P, the G-orthogonal projector onto the complement W of ker B.
/// I - P projects onto ker B.
struct Projector
{
  Eigen::MatrixXd entries;
  Metric metric;
  ConstraintMatrix wall_constraint;
};

/// R = I - (1 + mu) P together with the data it was built from.
struct ImpactMatrix
{
  Eigen::MatrixXd entries;
  double mu;
  Metric metric;
  ConstraintMatrix constraint;       // A
  ConstraintMatrix wall_constraint;  // B
  Eigen::MatrixXd projector;         // P
};

struct NestingReport
{
  bool passed = true;
  double max_residual = 0.0;  // max |A z| over the kernel basis of B
  double threshold = 0.0;
  std::optional<Eigen::VectorXd> witness;  // worst-violating kernel vector of B
};

/// Numerical rank from singular values relative to the largest one.
Eigen::Index numerical_rank(const Eigen::MatrixXd& m, double rank_tol);

// Throws RankDeficient if m is not of full row rank at rank_tol.
KernelBasis kernel_basis(const ConstraintMatrix& m, double rank_tol = kDefaultRankTol);

// P = G^{-1} B^T (B G^{-1} B^T)^{-1} B. Throws SingularGram when the Gram
// matrix B G^{-1} B^T is numerically singular.
Projector g_projector(const Metric& g, const ConstraintMatrix& b);

// Passes iff max|A Z_B| <= tol * max|A|.
NestingReport validate_nesting(const ConstraintMatrix& a, const ConstraintMatrix& b,
                               double tol = kDefaultNestingTol);

ImpactMatrix impact_matrix(const Metric& g, const ConstraintMatrix& a, const ConstraintMatrix& b,
                           double mu, double nesting_tol = kDefaultNestingTol);

// v+ = R v-. The pre-impact velocity must satisfy
// max|A v-| <= tol * (1 + max|A| * max|v-|), else InadmissiblePreVelocity.
Eigen::VectorXd apply_impact(const ImpactMatrix& r, const Eigen::VectorXd& v_minus,
                             const ConstraintMatrix& a, double tol = kDefaultAdmissibilityTol);

double kinetic_energy(const Metric& g, const Eigen::VectorXd& v);

// Largest absolute entry; 0 for an empty matrix.
double max_abs(const Eigen::MatrixXd& m);

}  // namespace nhimpact
