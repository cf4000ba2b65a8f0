#include "cpspan/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cpspan/rng.hpp"

namespace cpspan {

namespace {

constexpr int kMaxLloydIterations = 300;

std::vector<int> assign_nearest(const Matrix& points, const Matrix& centers) {
    std::vector<int> assignment(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (std::size_t k = 0; k < centers.rows(); ++k) {
            const double d2 = squared_row_distance(points, i, centers, k);
            if (d2 < best) {
                best = d2;
                best_k = static_cast<int>(k);
            }
        }
        assignment[i] = best_k;
    }
    return assignment;
}

// Move the farthest point of a multi-member cluster into each empty cluster.
void repair_empty_clusters(const Matrix& points, const Matrix& centers,
                           std::vector<int>& assignment, std::vector<std::size_t>& sizes) {
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (sizes[k] > 0) continue;
        double worst = -1.0;
        std::size_t victim = 0;
        for (std::size_t i = 0; i < points.rows(); ++i) {
            if (sizes[assignment[i]] < 2) continue;
            const double d2 = squared_row_distance(points, i, centers, assignment[i]);
            if (d2 > worst) {
                worst = d2;
                victim = i;
            }
        }
        --sizes[assignment[victim]];
        assignment[victim] = static_cast<int>(k);
        ++sizes[k];
    }
}

Matrix centers_from_assignment(const Matrix& points, const std::vector<int>& assignment,
                               std::size_t k) {
    Matrix centers(k, points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        ++counts[assignment[i]];
        for (std::size_t c = 0; c < points.cols(); ++c)
            centers(assignment[i], c) += points(i, c);
    }
    for (std::size_t j = 0; j < k; ++j)
        if (counts[j] > 0)
            for (std::size_t c = 0; c < points.cols(); ++c)
                centers(j, c) /= static_cast<double>(counts[j]);
    return centers;
}

double inertia_of(const Matrix& points, const Matrix& centers,
                  const std::vector<int>& assignment) {
    double acc = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i)
        acc += squared_row_distance(points, i, centers, assignment[i]);
    return acc;
}

PrototypeSet lloyd(const Matrix& points, Matrix centers) {
    PrototypeSet result;
    std::vector<int> assignment(points.rows(), -1);
    for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
        std::vector<int> next = assign_nearest(points, centers);
        std::vector<std::size_t> sizes(centers.rows(), 0);
        for (int a : next) ++sizes[a];
        repair_empty_clusters(points, centers, next, sizes);
        const bool converged = next == assignment;
        assignment = std::move(next);
        centers = centers_from_assignment(points, assignment, centers.rows());
        result.iterations = iter + 1;
        if (converged) break;
    }
    result.centers = std::move(centers);
    result.assignments = std::move(assignment);
    result.inertia = inertia_of(points, result.centers, result.assignments);
    return result;
}

}  // namespace

PrototypeSet kmeans(const Matrix& points, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
    if (points.rows() < static_cast<std::size_t>(k))
        throw std::invalid_argument("kmeans: fewer points than clusters (" +
                                    std::to_string(points.rows()) + " < " + std::to_string(k) +
                                    ")");

    auto engine = make_engine(seed, rng_salt::kmeans_seed, points.rows(), k);
    std::uniform_int_distribution<std::size_t> first(0, points.rows() - 1);

    Matrix centers(k, points.cols());
    std::vector<std::size_t> chosen;
    chosen.push_back(first(engine));
    std::vector<double> dist2(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i)
        dist2[i] = squared_row_distance(points, i, points, chosen[0]);

    while (chosen.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (double d : dist2) total += d;
        std::size_t pick = 0;
        if (total <= 0.0) {
            // all mass on already-chosen duplicates; fall back to uniform
            pick = first(engine);
        } else {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(engine);
            for (std::size_t i = 0; i < points.rows(); ++i) {
                target -= dist2[i];
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        chosen.push_back(pick);
        for (std::size_t i = 0; i < points.rows(); ++i)
            dist2[i] = std::min(dist2[i], squared_row_distance(points, i, points, pick));
    }
    for (std::size_t j = 0; j < chosen.size(); ++j)
        for (std::size_t c = 0; c < points.cols(); ++c) centers(j, c) = points(chosen[j], c);

    return lloyd(points, std::move(centers));
}

PrototypeSet lloyd_from(const Matrix& points, Matrix centers) {
    if (points.rows() < centers.rows())
        throw std::invalid_argument("lloyd_from: fewer points than clusters");
    return lloyd(points, std::move(centers));
}

Matrix cost_matrix(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("cost_matrix: dimension mismatch");
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j)
            out(i, j) = squared_row_distance(a, i, b, j);
    return out;
}

AssignmentResult hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols()) throw std::invalid_argument("hungarian: matrix is not square");
    if (!cost.all_finite()) throw std::invalid_argument("hungarian: non-finite cost entry");
    const std::size_t n = cost.rows();
    constexpr double kInf = std::numeric_limits<double>::infinity();

    // Shortest augmenting paths with potentials; 1-based sentinels.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    AssignmentResult result;
    result.row_to_col.assign(n, 0);
    result.permutation = Matrix(n, n);
    for (std::size_t j = 1; j <= n; ++j) {
        result.row_to_col[match[j] - 1] = j - 1;
        result.permutation(match[j] - 1, j - 1) = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) result.cost += cost(i, result.row_to_col[i]);
    return result;
}

Matrix round_to_permutation(const Matrix& relaxed) {
    return hungarian(relaxed * -1.0).permutation;
}

Matrix project_cycle(Matrix p) {
    if (p.rows() != p.cols()) throw std::invalid_argument("project_cycle: matrix is not square");
    const std::size_t n = p.rows();
    const double inv = 1.0 / static_cast<double>(n);

    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) row_sum += p(i, j);
        const double shift = (row_sum - 1.0) * inv;
        if (shift != 0.0)
            for (std::size_t j = 0; j < n; ++j) p(i, j) -= shift;
    }
    for (std::size_t j = 0; j < n; ++j) {
        double col_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) col_sum += p(i, j);
        const double shift = (col_sum - 1.0) * inv;
        if (shift != 0.0)
            for (std::size_t i = 0; i < n; ++i) p(i, j) -= shift;
    }
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p.data()[i] < 0.0) p.data()[i] = 0.0;
    return p;
}

Matrix project_to_constraints(Matrix p, int max_cycles, double tol) {
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        p = project_cycle(std::move(p));
        if (constraint_residual(p) <= tol) break;
    }
    return p;
}

double constraint_residual(const Matrix& p) {
    double residual = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        residual = std::max(residual, -p.data()[i]);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < p.cols(); ++j) row_sum += p(i, j);
        residual = std::max(residual, std::abs(row_sum - 1.0));
    }
    for (std::size_t j = 0; j < p.cols(); ++j) {
        double col_sum = 0.0;
        for (std::size_t i = 0; i < p.rows(); ++i) col_sum += p(i, j);
        residual = std::max(residual, std::abs(col_sum - 1.0));
    }
    return residual;
}

double prototype_alignment_loss(const std::vector<Matrix>& centers_per_view,
                                const std::vector<AlignmentState>& states) {
    double total = 0.0;
    for (const AlignmentState& state : states) {
        const Matrix& ci = centers_per_view.at(state.view_i);
        const Matrix& cj = centers_per_view.at(state.view_j);
        if (ci.rows() != cj.rows() || ci.cols() != cj.cols() ||
            state.relaxed.rows() != ci.rows() || state.relaxed.cols() != ci.rows())
            throw std::invalid_argument("prototype_alignment_loss: shape mismatch");
        const Matrix diff = ci - matmul(state.relaxed, cj);
        total += squared_norm(diff) / static_cast<double>(ci.rows());
    }
    return total;
}

std::vector<AlignmentState> align_prototypes(const std::vector<Matrix>& centers_per_view) {
    if (centers_per_view.size() < 2)
        throw std::invalid_argument("align_prototypes: need at least two views");
    std::vector<AlignmentState> states;
    for (std::size_t i = 0; i < centers_per_view.size(); ++i) {
        for (std::size_t j = i + 1; j < centers_per_view.size(); ++j) {
            AlignmentState state;
            state.view_i = i;
            state.view_j = j;
            state.hard = hungarian(cost_matrix(centers_per_view[i], centers_per_view[j])).permutation;
            state.relaxed = state.hard;
            states.push_back(std::move(state));
        }
    }
    return states;
}

Tape::Var prototype_alignment_term(Tape& tape, Tape::Var ci, Tape::Var cj, Tape::Var p) {
    const std::size_t k = tape.value(ci).rows();
    Tape::Var diff = tape.sub(ci, tape.matmul(p, cj));
    return tape.scale(tape.sum_squares(diff), 1.0 / static_cast<double>(k));
}

}  // namespace cpspan
