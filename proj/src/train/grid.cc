#include "rephrase/train/grid.h"

#include <algorithm>
#include <atomic>
#include <ostream>
#include <thread>

namespace rephrase::train {

GridSpec GridSpec::full() {
  GridSpec g;
  for (int i = 2; i <= 20; ++i) g.lambdas.push_back(i * 0.05);
  for (int i = 10; i <= 20; ++i) g.thresholds.push_back(i * 0.05);
  return g;
}

GridReport grid_search(const GridSpec& spec, const CellRunner& run, unsigned threads) {
  if (spec.cells() == 0) throw std::invalid_argument("empty grid");
  GridReport report;
  for (double l : spec.lambdas) {
    for (double t : spec.thresholds) report.cells.push_back({l, t, 0});
  }
  std::size_t n = report.cells.size();
  unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](unsigned w) {
    try {
      for (std::size_t i = next++; i < n; i = next++) {
        CopyLossConfig c;
        c.lambda = report.cells[i].lambda;
        c.threshold = report.cells[i].threshold;
        report.cells[i].valid_em = run(c);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  auto key = [](const GridCell& c) { return std::make_tuple(-c.valid_em, c.lambda, c.threshold); };
  report.best = *std::min_element(report.cells.begin(), report.cells.end(),
                                  [&](const GridCell& a, const GridCell& b) { return key(a) < key(b); });
  return report;
}

CellRunner seq2seq_cell_runner(std::function<std::unique_ptr<models::Seq2SeqModel>()> factory,
                               const corpus::Dataset& train, const corpus::Dataset& valid,
                               const TrainConfig& cfg) {
  return [factory = std::move(factory), &train, &valid, cfg](const CopyLossConfig& copy) {
    auto model = factory();
    TrainConfig c = cfg;
    c.log_path.reset();
    TrainResult r = train_seq2seq(*model, train, valid, c, copy);
    return r.best_valid_em;
  };
}

void write_grid_csv(std::ostream& out, const GridReport& report) {
  out << "lambda,T,valid_em\n";
  for (const auto& c : report.cells) out << c.lambda << ',' << c.threshold << ',' << c.valid_em << '\n';
}

}  // namespace rephrase::train
