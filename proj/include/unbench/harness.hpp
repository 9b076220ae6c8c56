#pragma once

#include "unbench/datagen.hpp"
#include "unbench/metrics.hpp"
#include "unbench/unlearn.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace unbench {

/// Learning-rate families: gentle for ng/ng_plus/bt/bt_light/scrub, aggressive for ft/cf_k/unsir.
const std::vector<double> &gentle_lrs();
const std::vector<double> &aggressive_lrs();
const std::vector<double> &default_lrs(Method m);

/// Every unlearning method crossed with its learning-rate family.
std::vector<MethodConfig> default_method_grid();

struct ExperimentConfig {
	GenConfig gen_config;
	ForgetSelection forget_selection;
	TrainRecipe train_recipe;
	std::vector<MethodConfig> method_grid = default_method_grid();
	GumWeights gum_weights;
	double nomus_accuracy_weight = 0.5;
	std::vector<std::uint64_t> seeds{7};
	std::string output_dir = "out";
	std::vector<std::string> report_formats{"json", "csv", "markdown"};
	/// Gain between the nominal (grid) learning rates and the SGD step actually taken.
	double lr_scale = 10000.0;
	/// "steady" (wall clock) or "work" (deterministic, charged per multiply-accumulate).
	std::string clock = "steady";
	std::size_t workers = 1;

	void validate() const;
};

std::unique_ptr<Clock> make_clock(const std::string &kind);

/// Per-seed facts of a benchmark run.
struct RunInfo {
	std::uint64_t seed = 0;
	std::vector<SpeakerId> forget_speakers;
	double forget_fraction = 0.0;
	std::size_t train_size = 0;
	std::size_t retain_size = 0;
	std::size_t forget_size = 0;
	std::size_t test_size = 0;
	double original_elapsed = 0.0;
	double gold_elapsed = 0.0;

	bool operator==(const RunInfo &) const = default;
};

struct BenchmarkReport {
	ExperimentConfig config;
	std::vector<RunInfo> runs;
	/// Per seed: original, gold, then one row per grid cell in grid order.
	std::vector<EvalRecord> records;
	/// Per seed and method: highest GUM among non-failed rows, smaller lr on ties.
	std::vector<EvalRecord> best;
};

/// Best row per (seed, method) over the non-baseline, non-failed records.
std::vector<EvalRecord> select_best(const std::vector<EvalRecord> &records);

BenchmarkReport run_benchmark(const ExperimentConfig &config);

struct SweepRow {
	double lr = 0.0;
	bool failed = false;
	double f1_test = 0.0;
	double f1_forget = 0.0;
	double mia = 0.0;
};

/// One unlearning run per learning rate, all from the same original model (first seed).
std::vector<SweepRow> sweep_lr(const ExperimentConfig &config, Method method, const std::vector<double> &lrs);
std::string sweep_to_csv(const std::vector<SweepRow> &rows);

struct AblationRow {
	int epochs = 0;
	bool failed = false;
	double f1_test = 0.0;
	double f1_test_gold = 0.0;
	double mia_unlearned = 0.0;
	double mia_gold = 0.0;
	double mia_original = 0.0;
	double gum = 0.0;
};

/// Retrains original and gold at each epoch budget and applies `method`.
std::vector<AblationRow> epoch_ablation(const ExperimentConfig &config, const std::vector<int> &epochs,
                                        const MethodConfig &method);
std::string ablation_to_csv(const std::vector<AblationRow> &rows);

enum class ReportFormat { csv, json, markdown };
ReportFormat report_format_from_string(const std::string &s);

std::string report_to_json(const BenchmarkReport &report);
BenchmarkReport report_from_json(const std::string &text);
std::string report_to_csv(const BenchmarkReport &report);
std::string report_to_markdown(const BenchmarkReport &report);

/// Writes report.<ext> into `dir` (created if missing); returns the written paths.
std::vector<std::string> emit_report(const BenchmarkReport &report, ReportFormat format, const std::string &dir);

void write_text_file(const std::string &path, const std::string &text);
std::string read_text_file(const std::string &path);

} // namespace unbench
