#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>
#include <vector>

#include "ttn/baselines.hpp"
#include "ttn/sttnn.hpp"
#include "ttn/ttnn.hpp"

namespace ttn {

// Worker cap: TTNN_THREADS when set, hardware concurrency otherwise.
inline int worker_count() {
  if (const char* env = std::getenv("TTNN_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace detail {

template <typename Fn>
void parallel_for(int n, Fn fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline double mean(std::vector<double> v) {
  double acc = 0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

struct MethodStats {
  double mean_err = 0.0;
  double median_err = 0.0;
  double mean_time = 0.0;
  double mean_sketch_flops = 0.0;
};

struct HilbertExperimentConfig {
  IndexTree tree;
  int d = 6;
  Index n = 20;
  std::vector<int> ranks;
  int p = 3;
  int trials = 30;
  std::uint64_t seed = 0;
};

struct HilbertRow {
  int rank = 0;
  MethodStats ttnn, sttnn, hmt, svd;
};

// Dense compression comparison on the Hilbert tensor: the three randomized
// methods run `trials` times with per-trial seeds and shared right-sketch
// labels; the SVD baseline is deterministic and runs once per rank.
inline std::vector<HilbertRow> run_hilbert_experiment(const HilbertExperimentConfig& cfg) {
  namespace ch = std::chrono;
  if (cfg.ranks.empty()) throw UsageError("hilbert experiment: empty rank sweep");
  const DenseTensor t = hilbert_tensor(cfg.d, cfg.n);
  const int rmax = *std::max_element(cfg.ranks.begin(), cfg.ranks.end());
  const int nr = static_cast<int>(cfg.ranks.size());

  struct Cell {
    double err = 0, time = 0, flops = 0;
  };
  std::vector<std::vector<Cell>> ttnn_c(nr), sttnn_c(nr), hmt_c(nr);
  for (int i = 0; i < nr; ++i) {
    ttnn_c[i].resize(cfg.trials);
    sttnn_c[i].resize(cfg.trials);
    hmt_c[i].resize(cfg.trials);
  }
  // per trial, one wide draw serves the whole rank sweep (narrower draws are
  // exact leading-column slices) and is shared between the sketch methods
  detail::parallel_for(cfg.trials, [&](int trial) {
    const std::uint64_t ts =
        rng::stream_key(cfg.seed, rng::kTagTrial, static_cast<std::uint64_t>(trial));
    const DrmSpec spec{DrmKind::gaussian, ts};
    TtnnConfig wide = make_config(cfg.tree, t.shape, rmax, cfg.p, spec);
    const DrmDraws draws = draw_drms(spec, cfg.tree, t.shape, wide.ranks, wide.overs);
    const auto seq = draw_sequential_sketches(cfg.tree, t.shape, wide);
    for (int i = 0; i < nr; ++i) {
      TtnnConfig c = make_config(cfg.tree, t.shape, cfg.ranks[static_cast<std::size_t>(i)],
                                 cfg.p, spec);
      {
        CompressReport rep;
        auto t0 = ch::steady_clock::now();
        TtnTensor out = compress_dense(t, cfg.tree, c, &rep, &draws);
        auto t1 = ch::steady_clock::now();
        ttnn_c[i][trial] = {rel_error(t, out), ch::duration<double>(t1 - t0).count(),
                            static_cast<double>(rep.sketch_flops)};
      }
      {
        CompressReport rep;
        auto t0 = ch::steady_clock::now();
        TtnTensor out = compress_dense_sequential(t, cfg.tree, c, &rep, nullptr, &draws, &seq);
        auto t1 = ch::steady_clock::now();
        sttnn_c[i][trial] = {rel_error(t, out), ch::duration<double>(t1 - t0).count(),
                             static_cast<double>(rep.sketch_flops)};
      }
      {
        auto t0 = ch::steady_clock::now();
        TtnTensor out = ttn_hmt(t, cfg.tree, c.ranks, c.overs, c.spec, &draws);
        auto t1 = ch::steady_clock::now();
        hmt_c[i][trial] = {rel_error(t, out), ch::duration<double>(t1 - t0).count(), 0.0};
      }
    }
  });

  std::vector<HilbertRow> rows;
  for (int i = 0; i < nr; ++i) {
    HilbertRow row;
    row.rank = cfg.ranks[static_cast<std::size_t>(i)];
    auto stats = [&](const std::vector<Cell>& cells) {
      std::vector<double> e, tt, f;
      for (const Cell& c : cells) {
        e.push_back(c.err);
        tt.push_back(c.time);
        f.push_back(c.flops);
      }
      return MethodStats{detail::mean(e), detail::median(e), detail::mean(tt),
                         detail::mean(f)};
    };
    row.ttnn = stats(ttnn_c[i]);
    row.sttnn = stats(sttnn_c[i]);
    row.hmt = stats(hmt_c[i]);
    {
      auto t0 = ch::steady_clock::now();
      TtnTensor out = ttn_svd(t, cfg.tree, RankMap::uniform(cfg.tree, row.rank));
      auto t1 = ch::steady_clock::now();
      const double err = rel_error(t, out);
      row.svd = {err, err, ch::duration<double>(t1 - t0).count(), 0.0};
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_hilbert_csv(std::ostream& os, const std::vector<HilbertRow>& rows,
                              bool with_times = true) {
  os << "rank,err_ttnn,err_sttnn,err_hmt,err_svd,time_ttnn,time_sttnn,time_hmt,time_svd\n";
  os << std::setprecision(17);
  for (const HilbertRow& r : rows) {
    os << r.rank << ',' << r.ttnn.mean_err << ',' << r.sttnn.mean_err << ',' << r.hmt.mean_err
       << ',' << r.svd.mean_err << ',' << (with_times ? r.ttnn.mean_time : 0.0) << ','
       << (with_times ? r.sttnn.mean_time : 0.0) << ',' << (with_times ? r.hmt.mean_time : 0.0)
       << ',' << (with_times ? r.svd.mean_time : 0.0) << '\n';
  }
}

struct RoundingExperimentConfig {
  IndexTree tree;
  Index n = 100;
  int stored_rank = 40;
  std::vector<int> ranks;
  int p = 10;
  int trials = 10;
  std::uint64_t seed = 0;
  Decay decay = Decay::quadratic;
};

struct RoundingRow {
  int rank = 0;
  MethodStats ttnn, hmt, svd;
};

// Recompression comparison on synthetic TTN inputs; one fresh input per trial,
// errors via Gram inner products (nothing is densified).
inline std::vector<RoundingRow> run_rounding_experiment(const RoundingExperimentConfig& cfg) {
  namespace ch = std::chrono;
  if (cfg.ranks.empty()) throw UsageError("rounding experiment: empty rank sweep");
  std::vector<Index> shape(static_cast<std::size_t>(cfg.tree.order()), cfg.n);
  const RankMap stored = RankMap::uniform(cfg.tree, cfg.stored_rank);
  std::vector<TtnTensor> inputs(static_cast<std::size_t>(cfg.trials));
  std::vector<std::uint64_t> sketch_seeds(static_cast<std::size_t>(cfg.trials));
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t ts =
        rng::stream_key(cfg.seed, rng::kTagTrial, static_cast<std::uint64_t>(trial));
    inputs[static_cast<std::size_t>(trial)] =
        random_ttn(cfg.tree, shape, stored, cfg.decay, rng::stream_key(ts, 1));
    sketch_seeds[static_cast<std::size_t>(trial)] = rng::stream_key(ts, 2);
  }
  std::vector<RoundingRow> rows;
  for (int r : cfg.ranks) {
    RoundingRow row;
    row.rank = r;
    std::vector<double> e_ttnn(cfg.trials), e_hmt(cfg.trials), e_svd(cfg.trials);
    std::vector<double> t_ttnn(cfg.trials), t_hmt(cfg.trials), t_svd(cfg.trials);
    detail::parallel_for(cfg.trials, [&](int trial) {
      const TtnTensor& in = inputs[static_cast<std::size_t>(trial)];
      TtnnConfig c = make_config(cfg.tree, shape, r, cfg.p,
                                 DrmSpec{DrmKind::khatri_rao,
                                         sketch_seeds[static_cast<std::size_t>(trial)]});
      {
        auto t0 = ch::steady_clock::now();
        SketchState s = sketch_ttn(in, cfg.tree, c.ranks, c.overs, c.spec);
        TtnTensor out = recover(s, c);
        auto t1 = ch::steady_clock::now();
        e_ttnn[trial] = rel_error(in, out);
        t_ttnn[trial] = ch::duration<double>(t1 - t0).count();
      }
      {
        auto t0 = ch::steady_clock::now();
        TtnTensor out = ttn_hmt_recompress(in, c.ranks, c.overs, c.spec);
        auto t1 = ch::steady_clock::now();
        e_hmt[trial] = rel_error(in, out);
        t_hmt[trial] = ch::duration<double>(t1 - t0).count();
      }
      {
        auto t0 = ch::steady_clock::now();
        TtnTensor out = ttn_svd_recompress(in, c.ranks);
        auto t1 = ch::steady_clock::now();
        e_svd[trial] = rel_error(in, out);
        t_svd[trial] = ch::duration<double>(t1 - t0).count();
      }
    });
    row.ttnn = {detail::mean(e_ttnn), detail::median(e_ttnn), detail::mean(t_ttnn), 0.0};
    row.hmt = {detail::mean(e_hmt), detail::median(e_hmt), detail::mean(t_hmt), 0.0};
    row.svd = {detail::mean(e_svd), detail::median(e_svd), detail::mean(t_svd), 0.0};
    rows.push_back(row);
  }
  return rows;
}

inline void write_rounding_csv(std::ostream& os, const std::vector<RoundingRow>& rows,
                               bool with_times = true) {
  os << "rank,err_ttnn,err_hmt,err_svd,time_ttnn,time_hmt,time_svd\n";
  os << std::setprecision(17);
  for (const RoundingRow& r : rows) {
    os << r.rank << ',' << r.ttnn.mean_err << ',' << r.hmt.mean_err << ',' << r.svd.mean_err
       << ',' << (with_times ? r.ttnn.mean_time : 0.0) << ','
       << (with_times ? r.hmt.mean_time : 0.0) << ',' << (with_times ? r.svd.mean_time : 0.0)
       << '\n';
  }
}

}  // namespace ttn
