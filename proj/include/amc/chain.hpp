#pragma once

// Absorbing-chain analysis of a token context.
//
// Every context token is a transient state; one synthetic absorbing state
// stands for "leaves the observed context". Transitions only move forward in
// the sequence, so Q is strictly upper triangular and I - Q is unit upper
// triangular. All solves below are back/forward substitutions on that
// structure; there is deliberately no general inversion routine.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amc/errors.hpp"
#include "amc/matrix.hpp"

namespace amc {

inline constexpr double kRowSumTolerance = 1e-9;
inline constexpr double kDefaultDeltaAbs = 1e-6;
inline constexpr double kMaxDeltaAbs = 1e-3;
inline constexpr double kDefaultScoreCap = 30.0;

inline void check_delta_abs(double delta_abs) {
  if (!(delta_abs > 0.0 && delta_abs <= kMaxDeltaAbs)) {
    throw ConfigError("delta_abs must lie in (0, 1e-3], got " + std::to_string(delta_abs));
  }
}

/// Row-stochastic, upper-triangular matrix of token-to-token jump
/// probabilities. Entry (i, i) holds the mass that leaves the context.
class ContextTransitionMatrix {
 public:
  /// Validates and wraps `p`. Throws InvariantError naming the first bad row.
  static ContextTransitionMatrix create(Matrix p) {
    const std::size_t n = p.size();
    if (n == 0) throw InvariantError("transition matrix must have at least one row");
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double x = p(i, j);
        if (!(x >= 0.0 && x <= 1.0)) {
          throw InvariantError("row " + std::to_string(i) + ": entry " + std::to_string(j) +
                               " = " + std::to_string(x) + " is not a probability");
        }
        if (j < i && x != 0.0) {
          throw InvariantError("row " + std::to_string(i) + ": entry " + std::to_string(j) +
                               " below the diagonal is nonzero");
        }
        sum += x;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw InvariantError("row " + std::to_string(i) + " sums to " + std::to_string(sum) +
                             ", not 1");
      }
    }
    return ContextTransitionMatrix(std::move(p));
  }

  static ContextTransitionMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    return create(Matrix::from_rows(rows));
  }

  std::size_t size() const noexcept { return p_.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return p_(i, j); }
  const Matrix& matrix() const noexcept { return p_; }

 private:
  explicit ContextTransitionMatrix(Matrix p) : p_(std::move(p)) {}
  Matrix p_;
};

/// The (Q, R) partition. Q is strictly upper triangular, R[i] >= delta_abs.
class AbsorbingDecomposition {
 public:
  static AbsorbingDecomposition create(Matrix q, std::vector<double> r, double delta_abs) {
    check_delta_abs(delta_abs);
    const std::size_t n = q.size();
    if (n == 0 || r.size() != n) {
      throw InvariantError("decomposition needs n >= 1 and |R| == n");
    }
    for (std::size_t i = 0; i < n; ++i) {
      double sum = r[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j <= i && q(i, j) != 0.0) {
          throw InvariantError("row " + std::to_string(i) + ": Q is not strictly upper triangular");
        }
        if (q(i, j) < 0.0) throw InvariantError("row " + std::to_string(i) + ": negative Q entry");
        sum += q(i, j);
      }
      if (r[i] < delta_abs) {
        throw InvariantError("row " + std::to_string(i) + ": absorbing mass " +
                             std::to_string(r[i]) + " below delta_abs");
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw InvariantError("row " + std::to_string(i) + " of [Q | R] sums to " +
                             std::to_string(sum));
      }
    }
    return AbsorbingDecomposition(std::move(q), std::move(r), delta_abs);
  }

  std::size_t size() const noexcept { return q_.size(); }
  const Matrix& q() const noexcept { return q_; }
  const std::vector<double>& r() const noexcept { return r_; }
  double delta_abs() const noexcept { return delta_abs_; }

 private:
  AbsorbingDecomposition(Matrix q, std::vector<double> r, double delta_abs)
      : q_(std::move(q)), r_(std::move(r)), delta_abs_(delta_abs) {}

  Matrix q_;
  std::vector<double> r_;
  double delta_abs_;
};

/// Splits P into transient and absorbing parts. The diagonal of P is routed
/// to the absorbing state; rows whose diagonal is below delta_abs give up the
/// deficit proportionally from their off-diagonal entries.
inline AbsorbingDecomposition decompose(const ContextTransitionMatrix& p,
                                        double delta_abs = kDefaultDeltaAbs) {
  check_delta_abs(delta_abs);
  const std::size_t n = p.size();
  Matrix q(n);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double off = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      q(i, j) = p(i, j);
      off += p(i, j);
    }
    r[i] = p(i, i);
    if (r[i] < delta_abs) {
      const double scale = (1.0 - delta_abs) / off;
      for (std::size_t j = i + 1; j < n; ++j) q(i, j) *= scale;
      r[i] = delta_abs;
    }
  }
  return AbsorbingDecomposition::create(std::move(q), std::move(r), delta_abs);
}

inline AbsorbingDecomposition decompose(const Matrix& p, double delta_abs = kDefaultDeltaAbs) {
  return decompose(ContextTransitionMatrix::create(p), delta_abs);
}

/// N = (I - Q)^-1, expected visit counts before absorption.
class FundamentalMatrix {
 public:
  static FundamentalMatrix create(Matrix n_mat) {
    for (std::size_t i = 0; i < n_mat.size(); ++i)
      for (std::size_t j = 0; j < n_mat.size(); ++j)
        if (n_mat(i, j) < 0.0) throw InvariantError("fundamental matrix has a negative entry");
    return FundamentalMatrix(std::move(n_mat));
  }

  std::size_t size() const noexcept { return n_.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return n_(i, j); }
  const Matrix& matrix() const noexcept { return n_; }

 private:
  explicit FundamentalMatrix(Matrix n_mat) : n_(std::move(n_mat)) {}
  Matrix n_;
};

// Row form of (I - Q) N = I solved from the last row up:
//   N[i, :] = e_i + sum_{k > i} Q[i, k] * N[k, :]
// Each update is a contiguous axpy over columns >= k, about n^3 / 6 flops.
inline FundamentalMatrix fundamental(const AbsorbingDecomposition& d) {
  const std::size_t n = d.size();
  const Matrix& q = d.q();
  Matrix out(n);
  for (std::size_t i = n; i-- > 0;) {
    auto dst = out.row(i);
    dst[i] = 1.0;
    for (std::size_t k = i + 1; k < n; ++k) {
      const double qik = q(i, k);
      if (qik == 0.0) continue;
      auto src = out.row(k);
      for (std::size_t j = k; j < n; ++j) dst[j] += qik * src[j];
    }
    assert(dst[i] == 1.0);
  }
  return FundamentalMatrix::create(std::move(out));
}

/// Column j of N in O(j^2), without forming the rest of the matrix.
inline std::vector<double> fundamental_column(const AbsorbingDecomposition& d, std::size_t j) {
  const std::size_t n = d.size();
  assert(j < n);
  const Matrix& q = d.q();
  std::vector<double> col(n, 0.0);
  col[j] = 1.0;
  for (std::size_t i = j; i-- > 0;) {
    double acc = 0.0;
    auto qi = q.row(i);
    for (std::size_t k = i + 1; k <= j; ++k) acc += qi[k] * col[k];
    col[i] = acc;
  }
  return col;
}

/// Row i of N in O(n^2) by forward substitution on x^T (I - Q) = e_i^T.
inline std::vector<double> fundamental_row(const AbsorbingDecomposition& d, std::size_t i) {
  const std::size_t n = d.size();
  assert(i < n);
  const Matrix& q = d.q();
  std::vector<double> row(n, 0.0);
  row[i] = 1.0;
  for (std::size_t k = i; k < n; ++k) {
    const double xk = row[k];
    if (xk == 0.0) continue;
    auto qk = q.row(k);
    for (std::size_t j = k + 1; j < n; ++j) row[j] += xk * qk[j];
  }
  return row;
}

/// Ever-visit probabilities: v(i, j) = P(chain started at i reaches j).
class VisitationMatrix {
 public:
  std::size_t size() const noexcept { return v_.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return v_(i, j); }
  const Matrix& matrix() const noexcept { return v_; }

  static VisitationMatrix create(Matrix v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double x = v(i, j);
        if (!(x >= 0.0 && x <= 1.0 + 1e-12)) {
          throw InvariantError("visitation entry (" + std::to_string(i) + ", " +
                               std::to_string(j) + ") = " + std::to_string(x) +
                               " is not a probability");
        }
      }
    return VisitationMatrix(std::move(v));
  }

 private:
  explicit VisitationMatrix(Matrix v) : v_(std::move(v)) {}
  Matrix v_;
};

// V = N * diag(N)^-1. The diagonal is 1 for a strictly triangular Q, but the
// division is kept so the result stays right if self-loops are ever allowed.
inline VisitationMatrix visitation(const FundamentalMatrix& n_mat) {
  const std::size_t n = n_mat.size();
  Matrix v(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double diag = n_mat(j, j);
    if (diag == 0.0) {
      throw InvariantError("fundamental matrix has a zero diagonal entry at " + std::to_string(j));
    }
    for (std::size_t i = 0; i < n; ++i) v(i, j) = n_mat(i, j) / diag;
  }
  return VisitationMatrix::create(std::move(v));
}

struct InfoProfile {
  std::vector<double> scores;  // S(i), nats
  std::vector<double> losses;  // L_info(i), nats
  double score_cap = kDefaultScoreCap;
};

/// S(i) = -log V(0, i), clamped to [0, score_cap]. Unreachable tokens get
/// score_cap instead of infinity.
inline std::vector<double> info_scores_from_reach(std::span<const double> reach_from_first,
                                                  double score_cap = kDefaultScoreCap) {
  if (!(score_cap > 0.0)) throw ConfigError("score_cap must be positive");
  const double floor = std::exp(-score_cap);
  std::vector<double> s(reach_from_first.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = std::max(reach_from_first[i], floor);
    s[i] = std::min(std::max(0.0, -std::log(v)), score_cap);
  }
  if (!s.empty()) s[0] = 0.0;
  return s;
}

inline std::vector<double> info_scores(const VisitationMatrix& v,
                                       double score_cap = kDefaultScoreCap) {
  const auto first = v.matrix().row(0);
  return info_scores_from_reach(first, score_cap);
}

/// L(i) = S(i) * (1 - v(i, last)).
inline std::vector<double> info_loss_from_reach(std::span<const double> scores,
                                                std::span<const double> reach_to_last) {
  if (scores.size() != reach_to_last.size()) {
    throw InvariantError("score and visitation lengths differ");
  }
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double miss = std::clamp(1.0 - reach_to_last[i], 0.0, 1.0);
    out[i] = scores[i] * miss;
  }
  return out;
}

inline std::vector<double> info_loss(std::span<const double> scores, const VisitationMatrix& v) {
  if (scores.size() != v.size()) throw InvariantError("score and visitation lengths differ");
  const auto last = v.matrix().column(v.size() - 1);
  return info_loss_from_reach(scores, last);
}

/// Scores and losses from one row and one column of N, O(n^2). Used on the
/// decoding hot path where the full matrices are not needed.
inline InfoProfile info_profile(const AbsorbingDecomposition& d,
                                double score_cap = kDefaultScoreCap) {
  const std::size_t n = d.size();
  auto from_first = fundamental_row(d, 0);
  auto to_last = fundamental_column(d, n - 1);
  // diag(N) is exactly 1, so V's first row and last column equal N's.
  InfoProfile profile;
  profile.score_cap = score_cap;
  profile.scores = info_scores_from_reach(from_first, score_cap);
  profile.losses = info_loss_from_reach(profile.scores, to_last);
  return profile;
}

}  // namespace amc
