// Epsilon-SVR dual solved by sequential minimal optimization with
// second-order working-set selection. The 2n dual variables are
// alpha (sign +1) followed by alpha* (sign -1):
//
//   min 1/2 a^T Q a + p^T a   s.t.  sum_t s_t a_t = 0,  0 <= a_t <= C
//   Q_tu = s_t s_u K(x_t mod n, x_u mod n)
//   p_t = eps - y_t (t < n),   p_t = eps + y_{t-n} (t >= n)

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>
#include <vector>

#include "m2p/regression.hpp"

namespace m2p {

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kCacheBytes = std::size_t{256} << 20;

double kernel_value(SvrKernel kernel, double gamma, const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  if (kernel == SvrKernel::Linear) return a.dot(b);
  return std::exp(-gamma * (a - b).squaredNorm());
}

// Kernel rows K(i, .) computed on demand, FIFO-evicted under a byte budget.
class KernelRows {
 public:
  KernelRows(const Eigen::MatrixXd& x, SvrKernel kernel, double gamma)
      : x_(x), kernel_(kernel), gamma_(gamma) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    capacity_ = std::max<std::size_t>(2, kCacheBytes / (sizeof(double) * std::max<std::size_t>(n, 1)));
    diag_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      diag_[i] = kernel_value(kernel_, gamma_, x_.row(r), x_.row(r));
    }
  }

  const std::vector<double>& row(std::size_t i) {
    auto it = rows_.find(i);
    if (it != rows_.end()) return it->second;
    if (rows_.size() >= capacity_) {
      rows_.erase(order_.front());
      order_.pop_front();
    }
    const auto n = static_cast<std::size_t>(x_.rows());
    std::vector<double> r(n);
    const auto ri = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n; ++j) {
      r[j] = kernel_value(kernel_, gamma_, x_.row(ri), x_.row(static_cast<Eigen::Index>(j)));
    }
    order_.push_back(i);
    return rows_.emplace(i, std::move(r)).first->second;
  }

  double diag(std::size_t i) const { return diag_[i]; }

 private:
  const Eigen::MatrixXd& x_;
  SvrKernel kernel_;
  double gamma_;
  std::size_t capacity_;
  std::vector<double> diag_;
  std::unordered_map<std::size_t, std::vector<double>> rows_;
  std::deque<std::size_t> order_;
};

}  // namespace

SvrSolution solve_svr(const Eigen::MatrixXd& x_raw, const Eigen::VectorXd& y, const SvrParams& params) {
  const Eigen::Index n = x_raw.rows();
  if (n < 1 || y.size() != n) throw Error("fit_svr: row count mismatch");
  if (!(params.c > 0.0)) throw Error("fit_svr: C must be positive");
  if (!(params.tol > 0.0)) throw Error("fit_svr: tol must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(y(i))) throw Error("fit_svr: non-finite target");
  }

  SvrModel model;
  model.kernel = params.kernel;
  model.c = params.c;
  const Eigen::Index d = x_raw.cols();
  model.scale_mean = Eigen::VectorXd::Zero(d);
  model.scale_std = Eigen::VectorXd::Ones(d);
  if (params.standardize && n >= 2) {
    model.scale_mean = x_raw.colwise().mean().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      const double sd = std::sqrt((x_raw.col(j).array() - model.scale_mean(j)).square().mean());
      model.scale_std(j) = sd > 1e-12 * std::max(1.0, std::abs(model.scale_mean(j))) ? sd : 0.0;
    }
  }
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (model.scale_std(j) > 0.0) {
      x.col(j) = (x_raw.col(j).array() - model.scale_mean(j)) / model.scale_std(j);
    } else {
      x.col(j).setZero();
    }
  }

  if (params.gamma > 0.0) {
    model.gamma = params.gamma;
  } else {
    const double mean = x.size() ? x.mean() : 0.0;
    const double var = x.size() ? (x.array() - mean).square().mean() : 0.0;
    model.gamma = var > 0.0 && d > 0 ? 1.0 / (static_cast<double>(d) * var) : 1.0;
  }
  if (params.epsilon >= 0.0) {
    model.epsilon = params.epsilon;
  } else {
    model.epsilon = 0.1 * std::sqrt((y.array() - y.mean()).square().mean());
  }

  const auto nn = static_cast<std::size_t>(n);
  const std::size_t l2 = 2 * nn;
  const double c = params.c;
  const double eps = model.epsilon;
  std::vector<double> alpha(l2, 0.0);
  std::vector<double> grad(l2);
  std::vector<signed char> sign(l2);
  for (std::size_t t = 0; t < nn; ++t) {
    sign[t] = 1;
    sign[t + nn] = -1;
    grad[t] = eps - y(static_cast<Eigen::Index>(t));
    grad[t + nn] = eps + y(static_cast<Eigen::Index>(t));
  }
  KernelRows kernel(x, model.kernel, model.gamma);
  auto q_diag = [&](std::size_t t) { return kernel.diag(t % nn); };

  const std::size_t max_iter = params.max_iter ? params.max_iter : std::max<std::size_t>(10'000'000, 100 * nn);
  std::size_t iter = 0;
  double violation = 0.0;
  bool converged = false;

  while (true) {
    // Working set: i maximizes -s_t G_t over I_up, j minimizes the
    // second-order decrease among I_low violators paired with i.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = l2;
    for (std::size_t t = 0; t < l2; ++t) {
      if (sign[t] == 1) {
        if (alpha[t] < c && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = t;
        }
      } else if (alpha[t] > 0.0 && grad[t] >= gmax) {
        gmax = grad[t];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t j = l2;
    double best = std::numeric_limits<double>::infinity();
    const std::vector<double>* ki = i < l2 ? &kernel.row(i % nn) : nullptr;
    for (std::size_t t = 0; t < l2 && ki; ++t) {
      // sign[i] * Q_it = sign[t] * K(i, t)
      const double k_it = (*ki)[t % nn];
      if (sign[t] == 1) {
        if (alpha[t] > 0.0) {
          const double diff = gmax + grad[t];
          if (grad[t] >= gmax2) gmax2 = grad[t];
          if (diff > 0.0) {
            double quad = q_diag(i) + q_diag(t) - 2.0 * k_it;
            if (quad <= 0.0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best) {
              best = obj;
              j = t;
            }
          }
        }
      } else if (alpha[t] < c) {
        const double diff = gmax - grad[t];
        if (-grad[t] >= gmax2) gmax2 = -grad[t];
        if (diff > 0.0) {
          double quad = q_diag(i) + q_diag(t) - 2.0 * k_it;
          if (quad <= 0.0) quad = kTau;
          const double obj = -(diff * diff) / quad;
          if (obj <= best) {
            best = obj;
            j = t;
          }
        }
      }
    }
    violation = gmax + gmax2;
    if (i == l2 || j == l2 || violation < params.tol) {
      converged = true;
      break;
    }
    if (iter >= max_iter) break;
    ++iter;

    const std::vector<double> row_i = kernel.row(i % nn);
    const std::vector<double>& row_j = kernel.row(j % nn);
    auto q = [&](const std::vector<double>& row, std::size_t a, std::size_t b) {
      return static_cast<double>(sign[a] * sign[b]) * row[b % nn];
    };
    const double q_ij = q(row_i, i, j);
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (sign[i] != sign[j]) {
      double quad = q_diag(i) + q_diag(j) + 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = q_diag(i) + q_diag(j) - 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < l2; ++t) {
      grad[t] += sign[t] * (sign[i] * row_i[t % nn] * di + sign[j] * row_j[t % nn] * dj);
    }
  }

  // Offset from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < l2; ++t) {
    const double yg = sign[t] * grad[t];
    if (alpha[t] >= c) {
      if (sign[t] == -1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (alpha[t] <= 0.0) {
      if (sign[t] == 1) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  SvrSolution solution;
  solution.beta.resize(n);
  std::vector<Eigen::Index> support;
  for (std::size_t t = 0; t < nn; ++t) {
    const double b = alpha[t] - alpha[t + nn];
    solution.beta(static_cast<Eigen::Index>(t)) = b;
    if (b != 0.0) support.push_back(static_cast<Eigen::Index>(t));
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), d);
  model.dual_coef.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t s = 0; s < support.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(support[s]);
    model.dual_coef(static_cast<Eigen::Index>(s)) = solution.beta(support[s]);
  }
  model.bias = -rho;
  model.iterations = iter;
  model.converged = converged;
  solution.model = std::move(model);
  solution.max_violation = violation;
  if (!converged) {
    throw SvrNotConverged("fit_svr: no convergence after " + std::to_string(iter) +
                              " iterations (KKT violation " + std::to_string(violation) + ")",
                          solution.model);
  }
  return solution;
}

SvrModel fit_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const SvrParams& params) {
  return solve_svr(x, y, params).model;
}

Eigen::VectorXd predict(const SvrModel& model, const Eigen::MatrixXd& x_raw) {
  if (x_raw.cols() != model.scale_mean.size()) throw Error("predict: dimension mismatch");
  Eigen::VectorXd out(x_raw.rows());
  Eigen::RowVectorXd xs(x_raw.cols());
  for (Eigen::Index r = 0; r < x_raw.rows(); ++r) {
    for (Eigen::Index j = 0; j < x_raw.cols(); ++j) {
      xs(j) = model.scale_std(j) > 0.0 ? (x_raw(r, j) - model.scale_mean(j)) / model.scale_std(j) : 0.0;
    }
    double f = model.bias;
    for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s) {
      f += model.dual_coef(s) * kernel_value(model.kernel, model.gamma, model.support_vectors.row(s), xs);
    }
    out(r) = f;
  }
  return out;
}

}  // namespace m2p
