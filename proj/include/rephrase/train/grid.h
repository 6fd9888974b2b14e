#ifndef REPHRASE_TRAIN_GRID_H_
#define REPHRASE_TRAIN_GRID_H_

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "rephrase/train/trainer.h"

namespace rephrase::train {

struct GridSpec {
  std::vector<double> lambdas;
  std::vector<double> thresholds;

  // lambda in [0.1, 1] and T in [0.5, 1], both in steps of 0.05.
  static GridSpec full();
  std::size_t cells() const { return lambdas.size() * thresholds.size(); }
};

struct GridCell {
  double lambda = 0;
  double threshold = 0;
  double valid_em = 0;
};

struct GridReport {
  std::vector<GridCell> cells;  // lambda-major, both ascending as given
  GridCell best;
};

// Trains one cell and returns its valid EM. Called concurrently from
// several threads, so it must build its own model.
using CellRunner = std::function<double(const CopyLossConfig&)>;

// Exhaustive search; ties go to the smaller lambda, then the smaller T.
GridReport grid_search(const GridSpec& spec, const CellRunner& run, unsigned threads = 0);

// Cell runner training a fresh model from `factory` with the hinge loss.
CellRunner seq2seq_cell_runner(std::function<std::unique_ptr<models::Seq2SeqModel>()> factory,
                               const corpus::Dataset& train, const corpus::Dataset& valid,
                               const TrainConfig& cfg);

// Header "lambda,T,valid_em", one row per cell.
void write_grid_csv(std::ostream& out, const GridReport& report);

}  // namespace rephrase::train

#endif  // REPHRASE_TRAIN_GRID_H_
