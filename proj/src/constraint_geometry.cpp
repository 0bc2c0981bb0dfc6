#include "nhimpact/constraint_geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "nhimpact/error.hpp"

namespace nhimpact
{

namespace
{

// Below this ratio of smallest to largest LDLT pivot the Gram matrix is
// treated as singular.
constexpr double kGramPivotRatio = 1e-14;

std::string shape(const Eigen::MatrixXd& m)
{
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

}  // namespace

double max_abs(const Eigen::MatrixXd& m)
{
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// ===== Metric =====

Metric::Metric(const Eigen::MatrixXd& entries, double spd_tol)
{
  if (entries.rows() != entries.cols() || entries.rows() == 0)
  {
    throw Error(ErrorKind::InvalidMetric, "metric must be square and nonempty, got " + shape(entries));
  }
  if (!entries.allFinite())
  {
    throw Error(ErrorKind::InvalidMetric, "metric has non-finite entries");
  }
  const double scale = max_abs(entries);
  if (max_abs(entries - entries.transpose()) > spd_tol * scale)
  {
    throw Error(ErrorKind::InvalidMetric, "metric is not symmetric");
  }
  entries_ = 0.5 * (entries + entries.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries_, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || !(lo > spd_tol * hi))
  {
    std::ostringstream os;
    os << "metric is not positive definite (eigenvalues in [" << lo << ", " << hi << "])";
    throw Error(ErrorKind::InvalidMetric, os.str());
  }
  llt_.compute(entries_);
  if (llt_.info() != Eigen::Success)
  {
    throw Error(ErrorKind::InvalidMetric, "Cholesky factorization of the metric failed");
  }
}

Metric Metric::identity(Eigen::Index n)
{
  return Metric(Eigen::MatrixXd::Identity(n, n));
}

Eigen::MatrixXd Metric::solve(const Eigen::MatrixXd& rhs) const
{
  return llt_.solve(rhs);
}

// ===== ConstraintMatrix =====

Eigen::Index numerical_rank(const Eigen::MatrixXd& m, double rank_tol)
{
  if (m.size() == 0)
  {
    return 0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double cutoff = rank_tol * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
  {
    if (sv(i) > cutoff && sv(i) > 0.0)
    {
      ++rank;
    }
  }
  return rank;
}

ConstraintMatrix::ConstraintMatrix(const Eigen::MatrixXd& entries, double rank_tol)
  : entries_(entries), rank_tol_(rank_tol)
{
  if (!(rank_tol > 0.0 && rank_tol < 1.0))
  {
    throw Error(ErrorKind::RankDeficient, "rank_tol must lie in (0, 1)");
  }
  if (!entries.allFinite())
  {
    throw Error(ErrorKind::RankDeficient, "constraint matrix has non-finite entries");
  }
  if (entries.rows() > 0)
  {
    const auto rank = numerical_rank(entries, rank_tol);
    if (rank < entries.rows())
    {
      std::ostringstream os;
      os << "constraint matrix " << shape(entries) << " has numerical rank " << rank;
      throw Error(ErrorKind::RankDeficient, os.str());
    }
  }
}

ConstraintMatrix::ConstraintMatrix(Eigen::MatrixXd entries, double rank_tol, bool)
  : entries_(std::move(entries)), rank_tol_(rank_tol)
{
}

ConstraintMatrix ConstraintMatrix::empty(Eigen::Index cols)
{
  return ConstraintMatrix(Eigen::MatrixXd(0, cols), kDefaultRankTol, true);
}

// ===== Operations =====

KernelBasis kernel_basis(const ConstraintMatrix& m, double rank_tol)
{
  const Eigen::Index n = m.cols();
  if (m.is_empty())
  {
    return {Eigen::MatrixXd::Identity(n, n)};
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.matrix(), Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
  {
    if (sv(i) > rank_tol * sv(0) && sv(i) > 0.0)
    {
      ++rank;
    }
  }
  if (rank < m.rows())
  {
    std::ostringstream os;
    os << "numerical rank " << rank << " < " << m.rows() << " rows";
    throw Error(ErrorKind::RankDeficient, os.str());
  }
  return {svd.matrixV().rightCols(n - rank)};
}

Projector g_projector(const Metric& g, const ConstraintMatrix& b)
{
  const Eigen::Index n = g.dim();
  if (b.cols() != n)
  {
    throw Error(ErrorKind::SingularGram, "constraint has " + std::to_string(b.cols()) +
                                             " columns, metric dimension is " + std::to_string(n));
  }
  if (b.is_empty())
  {
    return {Eigen::MatrixXd::Zero(n, n), g, b};
  }

  const Eigen::MatrixXd ginv_bt = g.solve(b.matrix().transpose());
  Eigen::MatrixXd gram = b.matrix() * ginv_bt;
  gram = 0.5 * (gram + gram.transpose());

  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || !(pivots.minCoeff() > kGramPivotRatio * pivots.maxCoeff()))
  {
    throw Error(ErrorKind::SingularGram, "B G^-1 B^T is numerically singular");
  }
  Eigen::MatrixXd p = ginv_bt * ldlt.solve(b.matrix());
  return {std::move(p), g, b};
}

NestingReport validate_nesting(const ConstraintMatrix& a, const ConstraintMatrix& b, double tol)
{
  NestingReport report;
  if (a.cols() != b.cols())
  {
    report.passed = false;
    report.max_residual = std::numeric_limits<double>::infinity();
    return report;
  }
  if (a.is_empty())
  {
    return report;
  }

  const KernelBasis zb = kernel_basis(b, b.rank_tol());
  report.threshold = tol * max_abs(a.matrix());
  if (zb.dim() == 0)
  {
    return report;
  }
  const Eigen::MatrixXd residual = a.matrix() * zb.basis;
  Eigen::Index worst = 0;
  report.max_residual = residual.cwiseAbs().colwise().maxCoeff().maxCoeff(&worst);
  report.passed = report.max_residual <= report.threshold;
  if (!report.passed)
  {
    report.witness = zb.basis.col(worst);
  }
  return report;
}

ImpactMatrix impact_matrix(const Metric& g, const ConstraintMatrix& a, const ConstraintMatrix& b,
                           double mu, double nesting_tol)
{
  if (!(mu >= 0.0 && mu <= 1.0))
  {
    throw Error(ErrorKind::MuOutOfRange, "restitution coefficient " + std::to_string(mu) +
                                             " outside [0, 1]");
  }
  const NestingReport nesting = validate_nesting(a, b, nesting_tol);
  if (!nesting.passed)
  {
    std::ostringstream os;
    os << "ker B is not contained in ker A (max |A z| = " << nesting.max_residual
       << ", threshold " << nesting.threshold << ")";
    throw Error(ErrorKind::NestingViolated, os.str());
  }

  Projector p = g_projector(g, b);
  const Eigen::Index n = g.dim();
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(n, n) - (1.0 + mu) * p.entries;
  return {std::move(r), mu, g, a, b, std::move(p.entries)};
}

Eigen::VectorXd apply_impact(const ImpactMatrix& r, const Eigen::VectorXd& v_minus,
                             const ConstraintMatrix& a, double tol)
{
  if (v_minus.size() != r.entries.cols())
  {
    throw Error(ErrorKind::InadmissiblePreVelocity, "velocity dimension mismatch");
  }
  if (!a.is_empty())
  {
    const double violation = max_abs(a.matrix() * v_minus);
    const double bound = tol * (1.0 + max_abs(a.matrix()) * max_abs(v_minus));
    if (!(violation <= bound))
    {
      std::ostringstream os;
      os << "pre-impact velocity violates A v = 0 (max |A v| = " << violation << ")";
      throw Error(ErrorKind::InadmissiblePreVelocity, os.str());
    }
  }
  return r.entries * v_minus;
}

double kinetic_energy(const Metric& g, const Eigen::VectorXd& v)
{
  return 0.5 * v.dot(g.matrix() * v);
}

}  // namespace nhimpact
