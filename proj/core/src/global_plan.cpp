#include "refmod/global_plan.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace refmod {

namespace {

void check_polyline_simple(const std::vector<Vec2>& pts, bool closed,
                           const char* which) {
  const size_t nseg = closed ? pts.size() : pts.size() - 1;
  auto endpoints = [&](size_t k, Vec2& a, Vec2& b) {
    a = pts[k];
    b = pts[(k + 1) % pts.size()];
  };
  Vec2 a1, b1, a2, b2;
  for (size_t i = 0; i < nseg; ++i) {
    endpoints(i, a1, b1);
    for (size_t j = i + 2; j < nseg; ++j) {
      if (closed && i == 0 && j == nseg - 1) continue;  // adjacent via wrap
      endpoints(j, a2, b2);
      if (segments_intersect(a1, b1, a2, b2)) {
        throw std::invalid_argument(
            std::string("track ") + which +
            " boundary self-intersects at the given widths");
      }
    }
  }
}

}  // namespace

TrackModel build_track(std::vector<Vec2> centerline,
                       std::vector<double> width_pos,
                       std::vector<double> width_neg, bool closed) {
  const size_t k = centerline.size();
  if (k < 4) throw std::invalid_argument("track needs at least 4 centerline points");
  if (width_pos.size() != k || width_neg.size() != k) {
    throw std::invalid_argument("track widths must match the centerline length");
  }
  for (size_t i = 0; i < k; ++i) {
    if (!(width_pos[i] > 0.0) || !(width_neg[i] > 0.0)) {
      throw std::invalid_argument("track widths must be > 0");
    }
    const size_t j = (i + 1) % k;
    if ((closed || j != 0) && (centerline[j] - centerline[i]).norm() == 0.0) {
      throw std::invalid_argument("track has coincident centerline points");
    }
  }

  TrackModel track;
  track.closed = closed;
  track.normals.resize(k);
  for (size_t i = 0; i < k; ++i) {
    Vec2 tangent;
    if (closed) {
      tangent = centerline[(i + 1) % k] - centerline[(i + k - 1) % k];
    } else if (i == 0) {
      tangent = centerline[1] - centerline[0];
    } else if (i == k - 1) {
      tangent = centerline[k - 1] - centerline[k - 2];
    } else {
      tangent = centerline[i + 1] - centerline[i - 1];
    }
    const double len = tangent.norm();
    if (len == 0.0) {
      throw std::invalid_argument("track has a degenerate tangent");
    }
    track.normals[i] = (tangent / len).perp();
  }
  track.centerline = std::move(centerline);
  track.width_pos = std::move(width_pos);
  track.width_neg = std::move(width_neg);

  check_polyline_simple(track_boundary(track, true), closed, "left");
  check_polyline_simple(track_boundary(track, false), closed, "right");
  return track;
}

TrackModel load_track(const std::string& file, bool closed) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open track file: " + file);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(file + ": empty track file");
  std::vector<Vec2> center;
  std::vector<double> wp, wn;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Vec2 c;
    double left = 0.0, right = 0.0;
    if (!(ss >> c.x >> c.y >> left >> right)) {
      throw std::invalid_argument(file + ":" + std::to_string(line_no) +
                                  ": expected x,y,w_left,w_right");
    }
    center.push_back(c);
    wp.push_back(left);
    wn.push_back(right);
  }
  return build_track(std::move(center), std::move(wp), std::move(wn), closed);
}

std::vector<Vec2> track_boundary(const TrackModel& track, bool left) {
  std::vector<Vec2> pts(track.size());
  for (size_t i = 0; i < track.size(); ++i) {
    const double w = left ? track.width_pos[i] : -track.width_neg[i];
    pts[i] = track.centerline[i] + track.normals[i] * w;
  }
  return pts;
}

namespace {

// Second-difference stencil rows: index triples (j-1, j, j+1) over the
// raceline points, wrapping when closed; open tracks use interior rows only.
struct Stencil {
  std::vector<std::array<size_t, 3>> rows;
};

Stencil make_stencil(const TrackModel& track) {
  Stencil st;
  const size_t k = track.size();
  if (track.closed) {
    st.rows.reserve(k);
    for (size_t j = 0; j < k; ++j) {
      st.rows.push_back({(j + k - 1) % k, j, (j + 1) % k});
    }
  } else {
    st.rows.reserve(k - 2);
    for (size_t j = 1; j + 1 < k; ++j) st.rows.push_back({j - 1, j, j + 1});
  }
  return st;
}

}  // namespace

double curvature_cost(const TrackModel& track, const Eigen::VectorXd& offsets) {
  if (offsets.size() != static_cast<Eigen::Index>(track.size())) {
    throw std::invalid_argument("curvature_cost: offset length mismatch");
  }
  const Stencil st = make_stencil(track);
  double cost = 0.0;
  auto point = [&](size_t i) {
    return track.centerline[i] +
           track.normals[i] * offsets(static_cast<Eigen::Index>(i));
  };
  for (const auto& row : st.rows) {
    const Vec2 d = point(row[0]) - 2.0 * point(row[1]) + point(row[2]);
    cost += d.squared_norm();
  }
  return cost;
}

Interval admissible_interval(const TrackModel& track, size_t k,
                             const ObstacleMap* obstacles,
                             const OptimizeOptions& opts) {
  Interval box{-track.width_neg[k] + opts.wall_margin + opts.bound_eps,
               track.width_pos[k] - opts.wall_margin - opts.bound_eps};
  if (box.width() <= 0.0) {
    throw std::invalid_argument("track too narrow for the wall margin at point " +
                                std::to_string(k));
  }
  if (obstacles == nullptr) return box;

  // Collect blocked sub-intervals of n where c + n*N enters an inflated
  // obstacle, then keep the largest free piece.
  std::vector<Interval> free{box};
  const Vec2 c = track.centerline[k];
  const Vec2 nvec = track.normals[k];
  for (const Rect& r : obstacles->obstacles) {
    const double inf = opts.obstacle_inflation;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool empty = false;
    auto slab = [&](double origin, double dir, double mn, double mx) {
      if (std::abs(dir) < 1e-15) {
        if (origin < mn || origin > mx) empty = true;
        return;
      }
      double a = (mn - origin) / dir;
      double b = (mx - origin) / dir;
      if (a > b) std::swap(a, b);
      lo = std::max(lo, a);
      hi = std::min(hi, b);
    };
    slab(c.x, nvec.x, r.min_x() - inf, r.max_x() + inf);
    slab(c.y, nvec.y, r.min_y() - inf, r.max_y() + inf);
    if (empty || lo > hi) continue;

    std::vector<Interval> next;
    for (const Interval& piece : free) {
      if (hi <= piece.lo || lo >= piece.hi) {
        next.push_back(piece);
        continue;
      }
      if (lo > piece.lo) next.push_back({piece.lo, std::min(lo, piece.hi)});
      if (hi < piece.hi) next.push_back({std::max(hi, piece.lo), piece.hi});
    }
    free = std::move(next);
    if (free.empty()) {
      throw std::runtime_error("obstacle blocks the full track width at point " +
                               std::to_string(k));
    }
  }
  return *std::max_element(free.begin(), free.end(),
                           [](const Interval& a, const Interval& b) {
                             return a.width() < b.width();
                           });
}

namespace {

struct Qp {
  Eigen::SparseMatrix<double> hessian;  // of 0.5 n'Hn form, i.e. grad = H n + q
  Eigen::VectorXd linear;
  Eigen::VectorXd lo, hi;
  std::vector<size_t> vars;  // track indices of the decision variables
};

Qp build_qp(const TrackModel& track, const ObstacleMap* obstacles,
            const OptimizeOptions& opts) {
  const size_t k = track.size();
  Qp qp;
  if (track.closed) {
    qp.vars.resize(k);
    for (size_t i = 0; i < k; ++i) qp.vars[i] = i;
  } else {
    for (size_t i = 1; i + 1 < k; ++i) qp.vars.push_back(i);
  }
  std::vector<int> var_of(k, -1);
  for (size_t v = 0; v < qp.vars.size(); ++v) var_of[qp.vars[v]] = static_cast<int>(v);

  const auto nv = static_cast<Eigen::Index>(qp.vars.size());
  qp.lo.resize(nv);
  qp.hi.resize(nv);
  for (Eigen::Index v = 0; v < nv; ++v) {
    const Interval box = admissible_interval(track, qp.vars[static_cast<size_t>(v)],
                                             obstacles, opts);
    qp.lo(v) = box.lo;
    qp.hi(v) = box.hi;
    if (box.lo > box.hi) {
      throw std::runtime_error("empty admissible interval");
    }
  }

  // cost = sum_j |B_j + sum_k S_jk n_k N_k|^2 over both coordinates, with
  // S the second-difference stencil. grad = H n + q.
  const Stencil st = make_stencil(track);
  std::vector<Eigen::Triplet<double>> trips;
  qp.linear = Eigen::VectorXd::Zero(nv);
  const double coef[3] = {1.0, -2.0, 1.0};
  for (const auto& row : st.rows) {
    const Vec2 base = track.centerline[row[0]] - 2.0 * track.centerline[row[1]] +
                      track.centerline[row[2]];
    for (int a = 0; a < 3; ++a) {
      const int va = var_of[row[static_cast<size_t>(a)]];
      if (va < 0) continue;
      const Vec2 na = track.normals[row[static_cast<size_t>(a)]] * coef[a];
      qp.linear(va) += 2.0 * na.dot(base);
      for (int b = 0; b < 3; ++b) {
        const int vb = var_of[row[static_cast<size_t>(b)]];
        if (vb < 0) continue;
        const Vec2 nb = track.normals[row[static_cast<size_t>(b)]] * coef[b];
        trips.emplace_back(va, vb, 2.0 * na.dot(nb));
      }
    }
  }
  qp.hessian.resize(nv, nv);
  qp.hessian.setFromTriplets(trips.begin(), trips.end());
  return qp;
}

double spectral_bound(const Eigen::SparseMatrix<double>& h) {
  // Power iteration with a deterministic start vector.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(h.rows());
  v.normalize();
  double lambda = 1.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd w = h * v;
    const double n = w.norm();
    if (n == 0.0) return 1.0;
    lambda = n;
    v = w / n;
  }
  return lambda * 1.05;
}

double kkt_residual(const Qp& qp, const Eigen::VectorXd& x) {
  const Eigen::VectorXd g = qp.hessian * x + qp.linear;
  const Eigen::VectorXd proj =
      (x - g).cwiseMax(qp.lo).cwiseMin(qp.hi);
  return (x - proj).cwiseAbs().maxCoeff();
}

double qp_value(const Qp& qp, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(qp.hessian * x) + qp.linear.dot(x);
}

// Nesterov-accelerated projected gradient with monotone restart.
int fista(const Qp& qp, Eigen::VectorXd& x, double tol, int max_iter) {
  const double lip = spectral_bound(qp.hessian);
  const double step = 1.0 / lip;
  Eigen::VectorXd z = x;
  double t = 1.0;
  double fx = qp_value(qp, x);
  int it = 0;
  for (; it < max_iter; ++it) {
    const Eigen::VectorXd g = qp.hessian * z + qp.linear;
    Eigen::VectorXd x_new = (z - step * g).cwiseMax(qp.lo).cwiseMin(qp.hi);
    const double f_new = qp_value(qp, x_new);
    if (f_new > fx) {  // restart momentum
      z = x;
      t = 1.0;
      const Eigen::VectorXd gr = qp.hessian * z + qp.linear;
      x_new = (z - step * gr).cwiseMax(qp.lo).cwiseMin(qp.hi);
      fx = qp_value(qp, x_new);
    } else {
      fx = f_new;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = x_new + ((t - 1.0) / t_new) * (x_new - x);
    t = t_new;
    x = x_new;
    if (it % 32 == 0 && kkt_residual(qp, x) < tol) break;
  }
  return it;
}

// Exact solve on the free set; repeats until the active set is consistent.
void active_set_polish(const Qp& qp, Eigen::VectorXd& x, double tol) {
  const auto nv = x.size();
  for (int round = 0; round < 50; ++round) {
    if (kkt_residual(qp, x) < tol) return;
    const Eigen::VectorXd grad = qp.hessian * x + qp.linear;
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index i = 0; i < nv; ++i) {
      const bool at_lo = x(i) <= qp.lo(i) + 1e-12;
      const bool at_hi = x(i) >= qp.hi(i) - 1e-12;
      // keep a bound active only while its multiplier sign is right
      if ((at_lo && grad(i) > 0.0) || (at_hi && grad(i) < 0.0)) continue;
      free_idx.push_back(i);
    }
    if (free_idx.empty()) return;

    Eigen::VectorXd rhs = -qp.linear;
    rhs -= qp.hessian * x;
    // rhs currently = -(q + H x); solving H dx = rhs on the free set moves the
    // free variables to the unconstrained optimum given the fixed ones.
    Eigen::SparseMatrix<double> hff(static_cast<Eigen::Index>(free_idx.size()),
                                    static_cast<Eigen::Index>(free_idx.size()));
    std::vector<Eigen::Index> pos(static_cast<size_t>(nv), -1);
    for (size_t i = 0; i < free_idx.size(); ++i) pos[static_cast<size_t>(free_idx[i])] = static_cast<Eigen::Index>(i);
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index col = 0; col < qp.hessian.outerSize(); ++col) {
      if (pos[static_cast<size_t>(col)] < 0) continue;
      for (Eigen::SparseMatrix<double>::InnerIterator it(qp.hessian, col); it; ++it) {
        if (pos[static_cast<size_t>(it.row())] < 0) continue;
        trips.emplace_back(pos[static_cast<size_t>(it.row())],
                           pos[static_cast<size_t>(col)], it.value());
      }
    }
    hff.setFromTriplets(trips.begin(), trips.end());
    Eigen::VectorXd rf(static_cast<Eigen::Index>(free_idx.size()));
    for (size_t i = 0; i < free_idx.size(); ++i) rf(static_cast<Eigen::Index>(i)) = rhs(free_idx[i]);

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(hff);
    if (solver.info() != Eigen::Success) return;  // fall back to FISTA result
    const Eigen::VectorXd dx = solver.solve(rf);
    double scale = 1.0;  // largest feasible fraction of the step
    for (size_t i = 0; i < free_idx.size(); ++i) {
      const Eigen::Index idx = free_idx[i];
      const double d = dx(static_cast<Eigen::Index>(i));
      if (d > 0.0) scale = std::min(scale, (qp.hi(idx) - x(idx)) / d);
      else if (d < 0.0) scale = std::min(scale, (qp.lo(idx) - x(idx)) / d);
    }
    scale = std::max(scale, 0.0);
    for (size_t i = 0; i < free_idx.size(); ++i) {
      const Eigen::Index idx = free_idx[i];
      x(idx) = std::clamp(x(idx) + scale * dx(static_cast<Eigen::Index>(i)),
                          qp.lo(idx), qp.hi(idx));
    }
    if (scale >= 1.0 && kkt_residual(qp, x) < tol) return;
  }
}

}  // namespace

OffsetResult optimize_offsets(const TrackModel& track,
                              const ObstacleMap* obstacles,
                              const OptimizeOptions& opts) {
  const Qp qp = build_qp(track, obstacles, opts);
  const auto nv = static_cast<Eigen::Index>(qp.vars.size());

  // start from the box projection of the centerline
  Eigen::VectorXd x = Eigen::VectorXd::Zero(nv).cwiseMax(qp.lo).cwiseMin(qp.hi);
  OffsetResult result;
  result.iterations = fista(qp, x, opts.tol, opts.max_iterations);
  active_set_polish(qp, x, opts.tol);
  result.kkt_residual = kkt_residual(qp, x);

  result.offsets = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(track.size()));
  for (Eigen::Index v = 0; v < nv; ++v) {
    result.offsets(static_cast<Eigen::Index>(qp.vars[static_cast<size_t>(v)])) = x(v);
  }
  result.cost = curvature_cost(track, result.offsets);
  return result;
}

PlanPath to_plan_path(const TrackModel& track, const Eigen::VectorXd& offsets,
                      int samples_per_segment) {
  if (offsets.size() != static_cast<Eigen::Index>(track.size())) {
    throw std::invalid_argument("to_plan_path: offset length mismatch");
  }
  if (samples_per_segment < 1) {
    throw std::invalid_argument("to_plan_path: samples_per_segment must be >= 1");
  }
  std::vector<Vec2> raceline(track.size());
  for (size_t i = 0; i < track.size(); ++i) {
    raceline[i] = track.centerline[i] +
                  track.normals[i] * offsets(static_cast<Eigen::Index>(i));
  }
  const PlanPath coarse = make_plan_path(std::move(raceline), track.closed);
  const double total = coarse.total_length();
  const size_t count = track.size() * static_cast<size_t>(samples_per_segment);
  std::vector<Vec2> resampled;
  resampled.reserve(count + 1);
  Vec2 point, tangent;
  if (track.closed) {
    for (size_t i = 0; i < count; ++i) {
      path_point_at(coarse, total * static_cast<double>(i) / static_cast<double>(count),
                    point, tangent);
      resampled.push_back(point);
    }
  } else {
    for (size_t i = 0; i <= count; ++i) {
      path_point_at(coarse, total * static_cast<double>(i) / static_cast<double>(count),
                    point, tangent);
      resampled.push_back(point);
    }
  }
  return make_plan_path(std::move(resampled), track.closed);
}

}  // namespace refmod
