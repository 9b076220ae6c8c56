#include "unbench/metrics.hpp"

#include "unbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace unbench {

double macro_f1(std::span<const int> preds, std::span<const int> labels, std::size_t classes) {
	if (preds.size() != labels.size())
		throw DataError("macro_f1: predictions and labels differ in length");
	if (preds.empty())
		throw DataError("macro_f1: empty input");
	if (classes < 1)
		throw DataError("macro_f1: class count must be positive");
	std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
	for (std::size_t i = 0; i < preds.size(); ++i) {
		auto p = preds[i], l = labels[i];
		if (p < 0 || l < 0 || static_cast<std::size_t>(p) >= classes || static_cast<std::size_t>(l) >= classes)
			throw DataError("macro_f1: class id out of range");
		if (p == l) {
			++tp[static_cast<std::size_t>(p)];
		} else {
			++fp[static_cast<std::size_t>(p)];
			++fn[static_cast<std::size_t>(l)];
		}
	}
	double sum = 0.0;
	for (std::size_t c = 0; c < classes; ++c) {
		std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
		if (denom > 0)
			sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
	}
	return sum / static_cast<double>(classes);
}

std::vector<int> predictions(const LayeredModel &model, std::span<const Sample> samples) {
	std::vector<int> out;
	out.reserve(samples.size());
	for (const auto &s : samples)
		out.push_back(predict(model, s.x));
	return out;
}

std::vector<double> sample_losses(const LayeredModel &model, std::span<const Sample> samples) {
	std::vector<double> out;
	out.reserve(samples.size());
	for (const auto &s : samples)
		out.push_back(cross_entropy(forward(model, s.x), s.y));
	return out;
}

double mean_loss(const LayeredModel &model, std::span<const Sample> samples) {
	if (samples.empty())
		throw DataError("mean_loss: empty sample set");
	auto l = sample_losses(model, samples);
	return std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
}

double macro_f1(const LayeredModel &model, std::span<const Sample> samples) {
	std::vector<int> labels;
	labels.reserve(samples.size());
	for (const auto &s : samples)
		labels.push_back(s.y);
	auto preds = predictions(model, samples);
	return macro_f1(preds, labels, model.class_count());
}

namespace {

struct Scored {
	double loss;
	bool member;
};

std::vector<Scored> pool(std::span<const double> members, std::span<const double> nonmembers) {
	std::vector<Scored> out;
	out.reserve(members.size() + nonmembers.size());
	for (double v : members)
		out.push_back({v, true});
	for (double v : nonmembers)
		out.push_back({v, false});
	std::stable_sort(out.begin(), out.end(), [](const Scored &a, const Scored &b) { return a.loss < b.loss; });
	return out;
}

// Balanced accuracy when the `cut` lowest entries (extended through ties) are called members.
double balanced_accuracy(const std::vector<Scored> &sorted, std::size_t cut, std::size_t members,
                         std::size_t nonmembers) {
	std::size_t end = cut;
	if (end > 0)
		while (end < sorted.size() && sorted[end].loss == sorted[end - 1].loss)
			++end;
	std::size_t tp = 0, fp = 0;
	for (std::size_t i = 0; i < end; ++i)
		(sorted[i].member ? tp : fp)++;
	double tpr = static_cast<double>(tp) / static_cast<double>(members);
	double tnr = static_cast<double>(nonmembers - fp) / static_cast<double>(nonmembers);
	return 0.5 * (tpr + tnr);
}

} // namespace

double threshold_attack(std::span<const double> train_members, std::span<const double> train_nonmembers,
                        std::span<const double> eval_members, std::span<const double> eval_nonmembers) {
	if (train_members.empty() || train_nonmembers.empty() || eval_members.empty() || eval_nonmembers.empty())
		throw DataError("threshold_attack: every pool must be non-empty");
	auto train = pool(train_members, train_nonmembers);
	std::size_t best_cut = 0;
	double best = -1.0;
	for (std::size_t cut = 0; cut <= train.size(); ++cut) {
		if (cut > 0 && cut < train.size() && train[cut].loss == train[cut - 1].loss)
			continue; // not a distinct threshold
		double ba = balanced_accuracy(train, cut, train_members.size(), train_nonmembers.size());
		if (ba > best) {
			best = ba;
			best_cut = cut;
		}
	}
	double quantile = static_cast<double>(best_cut) / static_cast<double>(train.size());
	auto eval = pool(eval_members, eval_nonmembers);
	auto eval_cut = static_cast<std::size_t>(std::llround(quantile * static_cast<double>(eval.size())));
	return balanced_accuracy(eval, eval_cut, eval_members.size(), eval_nonmembers.size());
}

double mia_from_losses(std::span<const double> member_losses, std::span<const double> nonmember_losses,
                       std::uint64_t seed) {
	constexpr std::size_t kMinPool = 20;
	if (member_losses.size() < kMinPool || nonmember_losses.size() < kMinPool)
		throw DataError("mia: need at least 20 member and 20 non-member samples, got " +
		                std::to_string(member_losses.size()) + " and " + std::to_string(nonmember_losses.size()));
	std::mt19937_64 rng(seed);
	std::vector<double> mem(member_losses.begin(), member_losses.end());
	std::vector<double> non(nonmember_losses.begin(), nonmember_losses.end());
	std::shuffle(mem.begin(), mem.end(), rng);
	std::shuffle(non.begin(), non.end(), rng);
	std::size_t n = std::min(mem.size(), non.size());
	n -= n % 2;
	std::size_t half = n / 2;
	std::span<const double> m(mem.data(), n), o(non.data(), n);
	return threshold_attack(m.first(half), o.first(half), m.subspan(half), o.subspan(half));
}

double mia_score(const LayeredModel &model, std::span<const Sample> forget, std::span<const Sample> test,
                 std::uint64_t seed) {
	if (forget.size() < 20 || test.size() < 20)
		throw DataError("mia_score: forget and test sets need at least 20 samples each");
	auto members = sample_losses(model, forget);
	auto nonmembers = sample_losses(model, test);
	return mia_from_losses(members, nonmembers, seed);
}

namespace {
void check_unit(double v, const char *name) {
	if (!(v >= 0.0 && v <= 1.0))
		throw DataError(std::string(name) + " must lie in [0, 1]");
}
} // namespace

double utility_u(double f1_t_unlearned, double f1_t_gold) {
	check_unit(f1_t_unlearned, "F1 (unlearned)");
	check_unit(f1_t_gold, "F1 (gold)");
	return 1.0 - std::abs(f1_t_gold - f1_t_unlearned);
}

double efficacy_e(double mia_u, double mia_g, double mia_o) {
	check_unit(mia_u, "MIA (unlearned)");
	check_unit(mia_g, "MIA (gold)");
	check_unit(mia_o, "MIA (original)");
	const double sat_u = std::min(mia_u, mia_o);
	const double sat_g = std::min(mia_g, (sat_u + mia_o) / 2.0);
	const double denom = mia_o - sat_g;
	if (std::abs(denom) < 1e-12)
		return sat_u <= sat_g ? 1.0 : 0.0;
	const double r = (sat_u - sat_g) / denom;
	return std::clamp(1.0 - r * r, 0.0, 1.0);
}

double efficiency_t(double elapsed_u, double elapsed_g) {
	if (!(elapsed_u > 0.0) || !(elapsed_g > 0.0) || !std::isfinite(elapsed_u) || !std::isfinite(elapsed_g))
		throw TimingError("efficiency needs positive, finite times");
	const double t = 1.0 - std::log(elapsed_u + 1.0) / std::log(elapsed_g + 1.0);
	return std::clamp(t, 0.0, 1.0);
}

double gum(double u, double e, double t, const GumWeights &w) {
	const double num = (1.0 + w.alpha + w.beta) * u * e * t;
	if (num == 0.0)
		return 0.0;
	const double den = w.alpha * e * t + w.beta * u * t + u * e;
	return num / den;
}

double nomus(double f1_t, double mia, double accuracy_weight) {
	check_unit(f1_t, "F1");
	check_unit(mia, "MIA");
	return accuracy_weight * f1_t + (1.0 - accuracy_weight) * (1.0 - 2.0 * std::abs(mia - 0.5));
}

double speedup(double elapsed_g, double elapsed_u) {
	if (!(elapsed_u > 0.0) || !(elapsed_g > 0.0))
		throw TimingError("speedup needs positive times");
	return elapsed_g / elapsed_u;
}

void derive_scores(EvalRecord &rec, const Anchors &anchors, const GumWeights &w, double nomus_accuracy_weight) {
	rec.nomus = nomus(rec.f1_test, rec.mia, nomus_accuracy_weight);
	const bool baseline = rec.method == "original" || rec.method == "gold";
	const double elapsed = baseline ? anchors.elapsed_gold : rec.elapsed;
	rec.u = utility_u(rec.f1_test, anchors.f1_test_gold);
	rec.e = efficacy_e(rec.mia, anchors.mia_gold, anchors.mia_original);
	rec.t = baseline ? 0.0 : efficiency_t(elapsed, anchors.elapsed_gold);
	rec.gum = gum(rec.u, rec.e, rec.t, w);
	rec.speedup = baseline ? 1.0 : speedup(anchors.elapsed_gold, elapsed);
}

} // namespace unbench
