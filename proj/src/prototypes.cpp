#include "rca/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rca {

namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<double> seed_plus_plus(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k,
                                   Rng& rng) {
  std::vector<double> centroids;
  centroids.reserve(k * dim);
  std::vector<std::uint8_t> chosen(n, 0);
  auto take = [&](std::size_t i) {
    chosen[i] = 1;
    centroids.insert(centroids.end(), points.begin() + i * dim, points.begin() + (i + 1) * dim);
  };

  take(uniform_index(rng, n));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < k * dim) {
    const double* last = centroids.data() + centroids.size() - dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(points.data() + i * dim, last, dim));
      total += d2[i];
    }
    if (total <= 0.0) {
      // Every point coincides with a chosen centroid; take the first unused index.
      std::size_t i = 0;
      while (i < n && chosen[i]) ++i;
      take(i < n ? i : 0);
      continue;
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    take(pick);
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k, Rng& rng,
                    std::size_t max_iter, double tol) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be at least 1");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  if (points.size() != n * dim) throw std::invalid_argument("kmeans: point buffer size mismatch");

  KMeansResult res;
  res.centroids = seed_plus_plus(points, n, dim, k, rng);
  res.assignment.assign(n, 0);
  std::vector<double> dist(n);
  std::vector<std::size_t> counts(k);

  auto assign = [&]() {
    double obj = 0.0;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = points.data() + i * dim;
      std::size_t best = 0;
      double best_d = sq_dist(p, res.centroids.data(), dim);
      for (std::size_t j = 1; j < k; ++j) {
        const double d = sq_dist(p, res.centroids.data() + j * dim, dim);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      res.assignment[i] = best;
      dist[i] = best_d;
      ++counts[best];
    }
    // Empty clusters take the farthest point of a cluster with at least two members.
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.assignment[i]] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      --counts[res.assignment[far]];
      res.assignment[far] = j;
      ++counts[j];
      dist[far] = 0.0;
      std::copy_n(points.data() + far * dim, dim, res.centroids.data() + j * dim);
    }
    for (double d : dist) obj += d;
    return obj;
  };

  res.objective.push_back(assign());
  std::vector<double> sums(k * dim);
  for (std::size_t it = 0; it < max_iter; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = points.data() + i * dim;
      double* s = sums.data() + res.assignment[i] * dim;
      for (std::size_t d = 0; d < dim; ++d) s[d] += p[d];
    }
    double max_shift = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double* c = res.centroids.data() + j * dim;
      double shift = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double updated = sums[j * dim + d] / static_cast<double>(counts[j]);
        shift += (updated - c[d]) * (updated - c[d]);
        c[d] = updated;
      }
      max_shift = std::max(max_shift, std::sqrt(shift));
    }
    ++res.iterations;
    const double obj = assign();
    const double prev = res.objective.back();
    if (obj > prev + 1e-9 * (1.0 + std::abs(prev))) {
      throw std::logic_error("kmeans: objective increased from " + std::to_string(prev) + " to " +
                             std::to_string(obj));
    }
    res.objective.push_back(obj);
    if (max_shift < tol) break;
  }
  return res;
}

Tensor PrototypeSet::flattened() const { return Tensor::from({num_classes * k, dim}, values); }

PrototypeSet compute_prototypes(const MemoryBank& bank, std::size_t k, std::uint64_t seed, std::int32_t epoch) {
  if (k == 0) throw std::invalid_argument("compute_prototypes: K must be at least 1");
  PrototypeSet set;
  set.num_classes = bank.num_classes();
  set.k = k;
  set.dim = bank.dim();
  set.epoch = epoch;
  set.values.assign(set.num_classes * k * set.dim, 0.0);
  set.status.assign(set.num_classes, PrototypeStatus::Clustered);

  for (std::size_t l = 0; l < set.num_classes; ++l) {
    const SlotRows rows = bank.rows(l);
    double* out = set.values.data() + l * k * set.dim;
    const std::size_t n = rows.count();
    if (n == 0) {
      set.status[l] = PrototypeStatus::Empty;
      continue;
    }
    if (n < k) {
      set.status[l] = PrototypeStatus::Replicated;
      for (std::size_t j = 0; j < k; ++j) std::copy_n(rows.row(j % n).data(), set.dim, out + j * set.dim);
      continue;
    }
    Rng rng = make_rng(seed, 0x70726f746fULL + l);
    const KMeansResult km = kmeans(rows.data, n, set.dim, k, rng);
    std::copy(km.centroids.begin(), km.centroids.end(), out);
  }
  return set;
}

}  // namespace rca
