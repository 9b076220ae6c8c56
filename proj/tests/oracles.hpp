#pragma once

// Test-side reference implementations. Nothing here calls into the code it checks except
// forward() and the loss functions used to evaluate finite differences.

#include "unbench/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using namespace unbench;

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64 &rng, double scale = 1.0) {
	std::normal_distribution<double> g(0.0, scale);
	std::vector<double> v(n);
	for (auto &x : v)
		x = g(rng);
	return v;
}

inline double batch_loss(const LayeredModel &m, const std::vector<BatchItem> &batch, LossKind kind) {
	double sum = 0.0;
	for (const auto &it : batch) {
		auto logits = forward(m, it.x);
		if (kind != LossKind::kl_to_teacher)
			sum += cross_entropy(logits, it.label);
		if (kind != LossKind::task)
			sum += kl_divergence(logits, it.teacher_logits);
	}
	return sum / static_cast<double>(batch.size());
}

// Smallest |pre-activation| over every hidden unit for every input.
inline double kink_margin(const LayeredModel &m, const std::vector<std::vector<double>> &xs) {
	double margin = 1e300;
	for (const auto &x : xs) {
		std::vector<double> cur = x;
		for (std::size_t i = 0; i + 1 < m.layer_count(); ++i) {
			const Layer &l = m.layers()[i];
			std::vector<double> next(l.out);
			for (std::size_t r = 0; r < l.out; ++r) {
				double z = l.bias[r];
				for (std::size_t c = 0; c < l.in; ++c)
					z += l.w(r, c) * cur[c];
				margin = std::min(margin, std::abs(z));
				next[r] = std::max(0.0, z);
			}
			cur = next;
		}
	}
	return margin;
}

struct GradientCheck {
	std::size_t models = 0;
	std::size_t entries = 0;
	std::size_t failures = 0;
	double worst = 0.0;
};

// Random models (1-3 layers, every dim <= 8), random batches, all three loss kinds; each
// analytic gradient entry against a central difference with step h.
inline GradientCheck finite_difference_check(int models, std::uint64_t seed, double h = 1e-5, double tol = 1e-4) {
	std::mt19937_64 rng(seed);
	std::uniform_int_distribution<std::size_t> dim(1, 8), depth(0, 2), bsz(1, 4);
	GradientCheck out;
	for (int trial = 0; trial < models; ++trial) {
		ModelDims dims;
		dims.input = dim(rng);
		dims.hidden.resize(depth(rng));
		for (auto &d : dims.hidden)
			d = dim(rng);
		dims.classes = std::max<std::size_t>(2, dim(rng));
		auto m = init_model(dims, rng());
		for (auto &l : m.layers())
			for (auto &b : l.bias)
				b = std::normal_distribution<double>(0.0, 0.2)(rng);

		std::vector<std::vector<double>> xs, ts;
		const std::size_t n = bsz(rng);
		// Inputs that land near a rectifier kink are redrawn.
		do {
			xs.clear();
			for (std::size_t i = 0; i < n; ++i)
				xs.push_back(random_vector(dims.input, rng));
		} while (kink_margin(m, xs) < 1e-3);
		for (std::size_t i = 0; i < n; ++i)
			ts.push_back(random_vector(dims.classes, rng));
		std::vector<BatchItem> batch;
		for (std::size_t i = 0; i < n; ++i)
			batch.push_back({xs[i], static_cast<int>(rng() % dims.classes), ts[i]});

		const auto kind = static_cast<LossKind>(trial % 3);
		const auto g = backward(m, batch, kind, LayerMask::all(m.layer_count()));
		auto check = [&](double &param, double analytic) {
			const double keep = param;
			param = keep + h;
			const double up = batch_loss(m, batch, kind);
			param = keep - h;
			const double down = batch_loss(m, batch, kind);
			param = keep;
			const double numeric = (up - down) / (2.0 * h);
			const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
			out.worst = std::max(out.worst, rel);
			out.failures += rel >= tol;
			++out.entries;
		};
		for (std::size_t li = 0; li < m.layer_count(); ++li) {
			auto &l = m.layers()[li];
			for (std::size_t j = 0; j < l.weights.size(); ++j)
				check(l.weights[j], g.layers[li].weights[j]);
			for (std::size_t j = 0; j < l.bias.size(); ++j)
				check(l.bias[j], g.layers[li].bias[j]);
		}
		++out.models;
	}
	return out;
}

inline double confusion_macro_f1(const std::vector<int> &preds, const std::vector<int> &labels, std::size_t classes) {
	std::vector<std::vector<std::size_t>> cm(classes, std::vector<std::size_t>(classes, 0));
	for (std::size_t i = 0; i < preds.size(); ++i)
		++cm[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
	double sum = 0.0;
	for (std::size_t c = 0; c < classes; ++c) {
		std::size_t tp = cm[c][c], row = 0, col = 0;
		for (std::size_t k = 0; k < classes; ++k) {
			row += cm[c][k];
			col += cm[k][c];
		}
		std::size_t fp = col - tp, fn = row - tp;
		if (2 * tp + fp + fn > 0)
			sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
	}
	return sum / static_cast<double>(classes);
}

inline double balanced_at(const std::vector<double> &mem, const std::vector<double> &non, double tau) {
	auto tp = std::count_if(mem.begin(), mem.end(), [tau](double x) { return x <= tau; });
	auto tn = std::count_if(non.begin(), non.end(), [tau](double x) { return x > tau; });
	return 0.5 * (static_cast<double>(tp) / static_cast<double>(mem.size()) +
	              static_cast<double>(tn) / static_cast<double>(non.size()));
}

// Exhaustive threshold search: "member" iff loss <= tau, tau over -inf and every train loss,
// the smallest tau winning ties. Carried to eval as the same fraction of the pooled losses.
inline double brute_force_attack(const std::vector<double> &tm, const std::vector<double> &tn,
                                 const std::vector<double> &em, const std::vector<double> &en) {
	std::vector<double> taus{-INFINITY};
	taus.insert(taus.end(), tm.begin(), tm.end());
	taus.insert(taus.end(), tn.begin(), tn.end());
	std::sort(taus.begin(), taus.end());
	double best = -1.0, best_tau = -INFINITY;
	for (double tau : taus) {
		double ba = balanced_at(tm, tn, tau);
		if (ba > best) {
			best = ba;
			best_tau = tau;
		}
	}
	std::size_t n_train = tm.size() + tn.size(), at_or_below = 0;
	for (const auto *v : {&tm, &tn})
		for (double x : *v)
			at_or_below += x <= best_tau;
	std::vector<double> eval(em);
	eval.insert(eval.end(), en.begin(), en.end());
	std::sort(eval.begin(), eval.end());
	auto k = static_cast<std::size_t>(
	    std::llround(static_cast<double>(at_or_below) / static_cast<double>(n_train) * static_cast<double>(eval.size())));
	double eval_tau = k == 0 ? -INFINITY : eval[k - 1];
	return balanced_at(em, en, eval_tau);
}

inline std::vector<double> exponential_draws(std::size_t n, std::mt19937_64 &rng, double shift = 0.0) {
	std::exponential_distribution<double> e(1.0);
	std::vector<double> v(n);
	for (auto &x : v)
		x = e(rng) + shift;
	return v;
}

} // namespace oracle
