#include "mollia/query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>

#include "mollia/error.hpp"
#include "mollia/seeding.hpp"

namespace mollia {

namespace {

void check_batch(const QueryContext& ctx) {
  if (ctx.batch_size > ctx.ids.size()) {
    fail(ErrorKind::Validation, "batch size " + std::to_string(ctx.batch_size) + " exceeds unlabeled pool of " +
                                    std::to_string(ctx.ids.size()));
  }
}

std::vector<std::string> ids_at(const QueryContext& ctx, const std::vector<std::size_t>& rows) {
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(ctx.ids[r]);
  return out;
}

}  // namespace

double uncertainty_score(std::span<const double> p, UncertaintyMode mode) {
  if (p.empty()) fail(ErrorKind::Shape, "empty probability vector");
  switch (mode) {
    case UncertaintyMode::Entropy: {
      double h = 0.0;
      for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
      return h;
    }
    case UncertaintyMode::Margin: {
      double top1 = -1.0;
      double top2 = -1.0;
      for (double v : p) {
        if (v > top1) {
          top2 = top1;
          top1 = v;
        } else if (v > top2) {
          top2 = v;
        }
      }
      return p.size() == 1 ? -top1 : -(top1 - top2);
    }
    case UncertaintyMode::LeastConfidence:
      return 1.0 - *std::max_element(p.begin(), p.end());
  }
  return 0.0;
}

std::vector<std::string> select_random(const QueryContext& ctx) {
  check_batch(ctx);
  std::vector<std::size_t> rows(ctx.ids.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(derive_seed(ctx.seed, {"query", "random"}));
  shuffle(rows.begin(), rows.end(), rng);
  rows.resize(ctx.batch_size);
  return ids_at(ctx, rows);
}

std::vector<std::string> select_uncertainty(const QueryContext& ctx, UncertaintyMode mode) {
  check_batch(ctx);
  if (ctx.probs.size() != ctx.ids.size()) fail(ErrorKind::Shape, "predictions do not align with unlabeled ids");
  std::vector<double> score(ctx.ids.size());
  for (std::size_t i = 0; i < score.size(); ++i) score[i] = uncertainty_score(ctx.probs[i], mode);
  std::vector<std::size_t> rows(score.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::partial_sort(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(ctx.batch_size), rows.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (score[a] != score[b]) return score[a] > score[b];
                      return ctx.ids[a] < ctx.ids[b];
                    });
  rows.resize(ctx.batch_size);
  return ids_at(ctx, rows);
}

std::vector<std::string> select_coreset(const QueryContext& ctx) {
  check_batch(ctx);
  const std::size_t n = ctx.ids.size();
  if (ctx.features.size() != n) fail(ErrorKind::Shape, "features do not align with unlabeled ids");
  std::vector<std::size_t> picked;
  if (ctx.batch_size == 0) return {};

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> min_dist(n, kInf);
  std::vector<char> taken(n, 0);

  auto absorb = [&](const SparseVector& centre) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) min_dist[i] = std::min(min_dist[i], squared_distance(ctx.features[i], centre));
    }
  };
  auto take = [&](std::size_t i) {
    taken[i] = 1;
    picked.push_back(i);
    absorb(ctx.features[i]);
  };

  if (ctx.labeled_features.empty()) {
    // Farthest pair, ties to the lexicographically smallest (id, id) pair.
    std::size_t best = 0;
    if (n > 1) {
      double best_d = -1.0;
      std::size_t bi = 0;
      std::size_t bj = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          std::size_t a = i;
          std::size_t b = j;
          if (ctx.ids[b] < ctx.ids[a]) std::swap(a, b);
          const double d = squared_distance(ctx.features[a], ctx.features[b]);
          if (d > best_d || (d == best_d && std::tie(ctx.ids[a], ctx.ids[b]) < std::tie(ctx.ids[bi], ctx.ids[bj]))) {
            best_d = d;
            bi = a;
            bj = b;
          }
        }
      }
      best = bi;
    }
    take(best);
  } else {
    for (const auto& f : ctx.labeled_features) absorb(f);
  }

  while (picked.size() < ctx.batch_size) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || min_dist[i] > min_dist[best] || (min_dist[i] == min_dist[best] && ctx.ids[i] < ctx.ids[best]))
        best = i;
    }
    take(best);
  }
  return ids_at(ctx, picked);
}

namespace {

std::map<std::string, Strategy, std::less<>>& registry() {
  static std::map<std::string, Strategy, std::less<>> r = {
      {"random", select_random},
      {"entropy", [](const QueryContext& c) { return select_uncertainty(c, UncertaintyMode::Entropy); }},
      {"margin", [](const QueryContext& c) { return select_uncertainty(c, UncertaintyMode::Margin); }},
      {"least_confidence", [](const QueryContext& c) { return select_uncertainty(c, UncertaintyMode::LeastConfidence); }},
      {"coreset", select_coreset},
  };
  return r;
}

std::mutex registry_mutex;

}  // namespace

void register_strategy(std::string name, Strategy strategy) {
  std::lock_guard lock(registry_mutex);
  registry()[std::move(name)] = std::move(strategy);
}

const Strategy& find_strategy(std::string_view name) {
  std::lock_guard lock(registry_mutex);
  auto& r = registry();
  auto it = r.find(name);
  if (it == r.end()) {
    std::string known;
    for (const auto& [k, _] : r) known += (known.empty() ? "" : ", ") + k;
    fail(ErrorKind::Config, "unknown query strategy '" + std::string(name) + "' (available: " + known + ")");
  }
  return it->second;
}

std::vector<std::string> strategy_names() {
  std::lock_guard lock(registry_mutex);
  std::vector<std::string> out;
  for (const auto& [k, _] : registry()) out.push_back(k);
  return out;
}

}  // namespace mollia
