#pragma once

#include "cdbn/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cdbn::baselines {

enum class Kernel { Linear, Rbf };

inline std::string to_string(Kernel k) { return k == Kernel::Linear ? "linear" : "rbf"; }

struct SvrParams {
    Kernel kernel = Kernel::Rbf;
    double c = 1.0;
    double epsilon = 0.1;
    double gamma = 0.1;
};

inline std::string describe(const SvrParams& p) {
    char buf[96];
    if (p.kernel == Kernel::Rbf)
        std::snprintf(buf, sizeof buf, "rbf C=%g eps=%g gamma=%g", p.c, p.epsilon, p.gamma);
    else
        std::snprintf(buf, sizeof buf, "linear C=%g eps=%g", p.c, p.epsilon);
    return buf;
}

/// Epsilon-SVR in dual form: f(x) = sum_i coef_i K(sv_i, x) + bias.
struct SvrModel {
    SvrParams params;
    std::size_t dim = 0;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coefs;
    double bias = 0.0;
    /// Maximal KKT violation when the solver stopped.
    double kkt_gap = 0.0;
    std::size_t iterations = 0;
};

struct SvrSolverOptions {
    double tolerance = 1e-3;
    /// Iteration cap, in units of the training-set size.
    std::size_t max_passes = 10000;
};

inline double kernel_value(const SvrParams& p, std::span<const double> a, std::span<const double> b) {
    if (p.kernel == Kernel::Linear) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return std::exp(-p.gamma * d2);
}

inline double svr_predict(const SvrModel& m, std::span<const double> x) {
    if (x.size() != m.dim)
        throw Error(ErrorCode::DimensionMismatch,
                    "feature vector has " + std::to_string(x.size()) + " entries, model expects " + std::to_string(m.dim));
    double f = m.bias;
    for (std::size_t i = 0; i < m.support_vectors.size(); ++i) f += m.dual_coefs[i] * kernel_value(m.params, m.support_vectors[i], x);
    return f;
}

/// Solves the epsilon-SVR dual with pairwise (SMO) updates and second-order
/// working-set selection, over 2l variables (alpha, alpha*). Stops when the
/// maximal KKT violation drops below the tolerance.
inline SvrModel train_svr(const std::vector<std::vector<double>>& x, std::span<const double> y, const SvrParams& params,
                          const SvrSolverOptions& opts = {}) {
    const std::size_t l = x.size();
    if (l == 0 || y.size() != l) throw Error(ErrorCode::DimensionMismatch, "SVR needs matching non-empty x and y");
    const std::size_t dim = x.front().size();
    for (const auto& row : x)
        if (row.size() != dim) throw Error(ErrorCode::DimensionMismatch, "ragged SVR feature matrix");
    if (!(params.c > 0.0) || !(params.epsilon >= 0.0) || (params.kernel == Kernel::Rbf && !(params.gamma > 0.0)))
        throw Error(ErrorCode::InvalidConfig, "SVR needs c > 0, epsilon >= 0, gamma > 0");

    std::vector<double> kmat(l * l);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j <= i; ++j) kmat[i * l + j] = kmat[j * l + i] = kernel_value(params, x[i], x[j]);

    const std::size_t n = 2 * l;
    const double cap = params.c;
    constexpr double tau = 1e-12;
    std::vector<double> alpha(n, 0.0), grad(n);
    std::vector<signed char> sign(n);
    for (std::size_t t = 0; t < l; ++t) {
        sign[t] = 1;
        sign[t + l] = -1;
        grad[t] = params.epsilon - y[t];
        grad[t + l] = params.epsilon + y[t];
    }
    auto kq = [&](std::size_t i, std::size_t j) { return sign[i] * sign[j] * kmat[(i % l) * l + (j % l)]; };
    auto upper = [&](std::size_t t) { return alpha[t] >= cap; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    const std::size_t max_iter = std::max<std::size_t>(opts.max_passes * l, 100000);
    std::size_t iter = 0;
    double gap = std::numeric_limits<double>::infinity();
    while (iter < max_iter) {
        double gmax = -std::numeric_limits<double>::infinity(), gmax2 = -std::numeric_limits<double>::infinity();
        std::optional<std::size_t> pick_i, pick_j;
        for (std::size_t t = 0; t < n; ++t) {
            if (sign[t] == 1) {
                if (!upper(t) && -grad[t] >= gmax) gmax = -grad[t], pick_i = t;
            } else if (!lower(t) && grad[t] >= gmax) {
                gmax = grad[t], pick_i = t;
            }
        }
        double best_obj = std::numeric_limits<double>::infinity();
        if (pick_i) {
            const auto i = *pick_i;
            for (std::size_t t = 0; t < n; ++t) {
                double gdiff = 0.0, quad = 0.0;
                if (sign[t] == 1) {
                    if (lower(t)) continue;
                    gmax2 = std::max(gmax2, grad[t]);
                    gdiff = gmax + grad[t];
                    quad = kq(i, i) + kq(t, t) - 2.0 * sign[i] * kq(i, t);
                } else {
                    if (upper(t)) continue;
                    gmax2 = std::max(gmax2, -grad[t]);
                    gdiff = gmax - grad[t];
                    quad = kq(i, i) + kq(t, t) + 2.0 * sign[i] * kq(i, t);
                }
                if (gdiff > 0.0) {
                    const double obj = -(gdiff * gdiff) / (quad > 0.0 ? quad : tau);
                    if (obj <= best_obj) best_obj = obj, pick_j = t;
                }
            }
        }
        gap = gmax + gmax2;
        if (!pick_i || !pick_j || gap < opts.tolerance) break;
        ++iter;

        const auto i = *pick_i, j = *pick_j;
        const double old_i = alpha[i], old_j = alpha[j];
        const double qij = kq(i, j);
        if (sign[i] != sign[j]) {
            double quad = kq(i, i) + kq(j, j) + 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) alpha[j] = 0.0, alpha[i] = diff;
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0, alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > cap) alpha[i] = cap, alpha[j] = cap - diff;
            } else if (alpha[j] > cap) {
                alpha[j] = cap, alpha[i] = cap + diff;
            }
        } else {
            double quad = kq(i, i) + kq(j, j) - 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > cap) {
                if (alpha[i] > cap) alpha[i] = cap, alpha[j] = sum - cap;
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0, alpha[i] = sum;
            }
            if (sum > cap) {
                if (alpha[j] > cap) alpha[j] = cap, alpha[i] = sum - cap;
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0, alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[t] += kq(i, t) * di + kq(j, t) * dj;
    }
    if (gap >= opts.tolerance && iter >= max_iter)
        throw Error(ErrorCode::NonConvergence, "SMO stopped at the iteration cap with KKT gap " + std::to_string(gap));

    // Offset from free variables, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = sign[t] * grad[t];
        if (upper(t)) {
            if (sign[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (sign[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

    SvrModel m;
    m.params = params;
    m.dim = dim;
    m.bias = -rho;
    m.kkt_gap = gap;
    m.iterations = iter;
    for (std::size_t t = 0; t < l; ++t) {
        const double coef = alpha[t] - alpha[t + l];
        if (coef != 0.0) {
            m.support_vectors.push_back(x[t]);
            m.dual_coefs.push_back(coef);
        }
    }
    return m;
}

struct SvrGrid {
    std::vector<Kernel> kernels{Kernel::Rbf};
    std::vector<double> c{0.1, 1, 10, 100};
    std::vector<double> epsilon{0.01, 0.1};
    std::vector<double> gamma{0.01, 0.1, 1};
};

struct SvrSearch {
    SvrModel best;
    double validation_rmse = 0.0;
};

inline double rmse(const SvrModel& m, const std::vector<std::vector<double>>& x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = svr_predict(m, x[i]) - y[i];
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(x.size()));
}

/// Grid search with a chronological split: fit on the first 80% of samples,
/// score RMSE on the last 20%, then refit the winner on everything. Ties go
/// to the smaller c.
inline SvrSearch fit_svr(const std::vector<std::vector<double>>& x, std::span<const double> y, const SvrGrid& grid = {},
                         const SvrSolverOptions& opts = {}) {
    if (x.size() < 30) throw Error(ErrorCode::TooFewRows, "SVR needs at least 30 samples, got " + std::to_string(x.size()));
    const std::size_t cut = x.size() * 4 / 5;
    const std::vector<std::vector<double>> fit_x(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(cut));
    const std::vector<std::vector<double>> val_x(x.begin() + static_cast<std::ptrdiff_t>(cut), x.end());
    const auto fit_y = y.subspan(0, cut), val_y = y.subspan(cut);

    std::optional<SvrParams> best;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (auto kernel : grid.kernels)
        for (double c : grid.c)
            for (double eps : grid.epsilon)
                for (double gamma : kernel == Kernel::Rbf ? grid.gamma : std::vector<double>{1.0}) {
                    SvrParams params{kernel, c, eps, gamma};
                    double score;
                    try {
                        score = rmse(train_svr(fit_x, fit_y, params, opts), val_x, val_y);
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::NonConvergence) throw;
                        continue;
                    }
                    if (score < best_rmse || (score == best_rmse && best && c < best->c)) {
                        best_rmse = score;
                        best = params;
                    }
                }
    if (!best) throw Error(ErrorCode::NonConvergence, "no SVR grid candidate converged");
    return {train_svr(x, y, *best, opts), best_rmse};
}

} // namespace cdbn::baselines
