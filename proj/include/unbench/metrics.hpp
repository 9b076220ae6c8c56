#pragma once

#include "unbench/datagen.hpp"
#include "unbench/nn.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace unbench {

/// Unweighted mean of per-class F1 over all `classes` classes. A class that is neither
/// predicted nor present contributes 0.
double macro_f1(std::span<const int> preds, std::span<const int> labels, std::size_t classes);

std::vector<int> predictions(const LayeredModel &model, std::span<const Sample> samples);
std::vector<double> sample_losses(const LayeredModel &model, std::span<const Sample> samples);
double mean_loss(const LayeredModel &model, std::span<const Sample> samples);
double macro_f1(const LayeredModel &model, std::span<const Sample> samples);

/// Loss-threshold membership attack with an explicit attack-train / attack-eval split.
///
/// The threshold is fitted on the train pools (members are predicted for the lowest
/// losses; the cut maximizing balanced accuracy wins, earliest cut on ties) and carried
/// to the eval pools as a rank quantile. Only the ordering of losses matters, so the
/// score is unchanged by any strictly increasing transform of all losses.
double threshold_attack(std::span<const double> train_members, std::span<const double> train_nonmembers,
                        std::span<const double> eval_members, std::span<const double> eval_nonmembers);

/// Balanced held-out attack accuracy from raw per-sample losses. The non-member pool is
/// subsampled to the member pool size (or vice versa); both are split 50/50. Needs >= 20
/// samples in each pool.
double mia_from_losses(std::span<const double> member_losses, std::span<const double> nonmember_losses,
                       std::uint64_t seed);

double mia_score(const LayeredModel &model, std::span<const Sample> forget, std::span<const Sample> test,
                 std::uint64_t seed);

double utility_u(double f1_t_unlearned, double f1_t_gold);
double efficacy_e(double mia_u, double mia_g, double mia_o);
double efficiency_t(double elapsed_u, double elapsed_g);

struct GumWeights {
	double alpha = 1.0;
	double beta = 1.0;
};

double gum(double u, double e, double t, const GumWeights &w = {});

/// Equal weighting by default: w * f1 + (1 - w) * (1 - 2|mia - 0.5|).
double nomus(double f1_t, double mia, double accuracy_weight = 0.5);

double speedup(double elapsed_g, double elapsed_u);

/// Reference measurements every derived score is computed against.
struct Anchors {
	double f1_test_gold = 0.0;
	double mia_gold = 0.5;
	double mia_original = 0.5;
	double elapsed_gold = 1.0;
};

struct EvalRecord {
	std::string method;
	double lr = 0.0;
	std::uint64_t seed = 0;
	bool failed = false;
	std::string failure;

	double f1_test = 0.0;
	double f1_forget = 0.0;
	double mia = 0.0;
	double elapsed = 0.0;

	double u = 0.0;
	double e = 0.0;
	double t = 0.0;
	double gum = 0.0;
	double nomus = 0.0;
	double speedup = 0.0;

	bool operator==(const EvalRecord &) const = default;
};

/// Fills u/e/t/gum/nomus/speedup. Baseline rows ("original", "gold") are scored at
/// retraining cost: T = 0, speedup = 1, hence GUM = 0.
void derive_scores(EvalRecord &rec, const Anchors &anchors, const GumWeights &w = {},
                   double nomus_accuracy_weight = 0.5);

} // namespace unbench
