#include "nodex/eval/sweep.hpp"

#include <cstdio>

#include "nodex/data/preprocess.hpp"
#include "nodex/io/csv.hpp"

namespace nodex::eval {

namespace {

void append_rows(std::vector<SweepRow>& rows, Scalar fraction, std::uint64_t seed,
                 const MetricsReport& report) {
  rows.push_back({fraction, seed, "malignancy", report.malignancy_accuracy});
  for (int a = 0; a < kNumAttributes; ++a)
    rows.push_back({fraction, seed, kAttributeNames[a],
                    report.attribute_accuracy[static_cast<std::size_t>(a)]});
}

}  // namespace

SweepResult annotation_sweep(model::Encoder& encoder, const nn::ParamStore& encoder_store,
                             const data::Dataset& dataset, const data::DatasetSplit& split,
                             const SweepOptions& options, const std::filesystem::path& run_dir) {
  NODEX_CHECK(!options.fractions.empty() && !options.seeds.empty(),
              "annotation_sweep: need fractions and seeds");
  for (Scalar f : options.fractions)
    NODEX_CHECK(f > 0 && f <= 1, "annotation_sweep: fractions must be in (0,1]");

  SweepResult result;
  for (std::uint64_t seed : options.seeds) {
    for (Scalar fraction : options.fractions) {
      data::AnnotationMask mask = data::mask_annotations(split, fraction, seed);

      auto stage2 = probe::train_stage2(encoder, encoder_store, dataset, split, mask,
                                        options.probe_config, seed);
      EvaluateOptions eopts = options.eval;
      eopts.mode = "trained";
      eopts.annotation_fraction = fraction;
      MetricsReport report =
          evaluate(encoder, encoder_store, &stage2.probe, dataset, split, eopts);
      append_rows(result.rows, fraction, seed, report);

      if (options.with_baseline) {
        auto e2e = probe::train_end_to_end(dataset, split, mask, options.baseline, seed);
        MetricsReport base_report =
            evaluate(*e2e.encoder, e2e.encoder_store, &e2e.probe, dataset, split, eopts);
        append_rows(result.baseline_rows, fraction, seed, base_report);
      }
    }
  }

  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    write_sweep_csv(result.rows, run_dir / "sweep.csv");
    if (options.with_baseline)
      write_sweep_csv(result.baseline_rows, run_dir / "sweep_baseline.csv");
  }
  return result;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  io::CsvTable table;
  table.header = {"fraction", "seed", "task", "accuracy"};
  for (const auto& r : rows) {
    char frac[32], acc[32];
    std::snprintf(frac, sizeof(frac), "%g", r.fraction);
    std::snprintf(acc, sizeof(acc), "%.6f", r.accuracy);
    table.rows.push_back({frac, std::to_string(r.seed), r.task, acc});
  }
  io::write_csv(path, table);
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
  io::CsvTable table = io::read_csv(path);
  int c_frac = table.require_column("fraction");
  int c_seed = table.require_column("seed");
  int c_task = table.require_column("task");
  int c_acc = table.require_column("accuracy");
  std::vector<SweepRow> rows;
  for (const auto& r : table.rows)
    rows.push_back({std::stod(r[static_cast<std::size_t>(c_frac)]),
                    std::stoull(r[static_cast<std::size_t>(c_seed)]),
                    r[static_cast<std::size_t>(c_task)],
                    std::stod(r[static_cast<std::size_t>(c_acc)])});
  return rows;
}

}  // namespace nodex::eval
