#include "unbench/nn.hpp"

#include "unbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace unbench {

std::string to_string(Activation a) {
	switch (a) {
	case Activation::relu:
		return "relu";
	case Activation::identity:
		return "identity";
	}
	return "relu";
}

Activation activation_from_string(const std::string &name) {
	if (name == "relu")
		return Activation::relu;
	if (name == "identity")
		return Activation::identity;
	throw ConfigError("unknown activation '" + name + "'");
}

LayeredModel::LayeredModel(ModelDims dims, Activation activation, std::vector<Layer> layers,
                           std::optional<std::uint64_t> seed)
    : dims_(std::move(dims)), activation_(activation), layers_(std::move(layers)), seed_(seed) {
	validate();
}

std::size_t LayeredModel::parameter_count() const {
	std::size_t n = 0;
	for (const auto &l : layers_)
		n += l.weights.size() + l.bias.size();
	return n;
}

bool LayeredModel::all_finite() const {
	for (const auto &l : layers_) {
		for (double v : l.weights)
			if (!std::isfinite(v))
				return false;
		for (double v : l.bias)
			if (!std::isfinite(v))
				return false;
	}
	return true;
}

void LayeredModel::validate() const {
	if (dims_.classes < 2)
		throw ConfigError("class count must be at least 2");
	if (layers_.size() != dims_.layer_count())
		throw ShapeError("layer count does not match dims");
	std::size_t prev = dims_.input;
	for (std::size_t i = 0; i < layers_.size(); ++i) {
		const auto &l = layers_[i];
		std::size_t expect_out = i + 1 < layers_.size() ? dims_.hidden[i] : dims_.classes;
		if (l.in != prev || l.out != expect_out)
			throw ShapeError("layer " + std::to_string(i) + " has incompatible dimensions");
		if (l.weights.size() != l.in * l.out || l.bias.size() != l.out)
			throw ShapeError("layer " + std::to_string(i) + " parameter arrays have the wrong size");
		prev = l.out;
	}
}

GradientSet &GradientSet::operator+=(const GradientSet &other) {
	if (other.layers.size() != layers.size())
		throw ShapeError("gradient sets are not shape-congruent");
	for (std::size_t i = 0; i < layers.size(); ++i) {
		auto &a = layers[i];
		const auto &b = other.layers[i];
		if (a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size())
			throw ShapeError("gradient sets are not shape-congruent");
		for (std::size_t j = 0; j < a.weights.size(); ++j)
			a.weights[j] += b.weights[j];
		for (std::size_t j = 0; j < a.bias.size(); ++j)
			a.bias[j] += b.bias[j];
	}
	return *this;
}

bool GradientSet::all_finite() const {
	for (const auto &l : layers) {
		if (!std::all_of(l.weights.begin(), l.weights.end(), [](double v) { return std::isfinite(v); }))
			return false;
		if (!std::all_of(l.bias.begin(), l.bias.end(), [](double v) { return std::isfinite(v); }))
			return false;
	}
	return true;
}

LayerMask LayerMask::all(std::size_t layers) {
	return LayerMask(std::vector<bool>(layers, true));
}

LayerMask LayerMask::last_k(std::size_t layers, std::size_t k) {
	if (k < 1 || k > layers)
		throw ConfigError("k must be in [1, " + std::to_string(layers) + "], got " + std::to_string(k));
	std::vector<bool> t(layers, false);
	for (std::size_t i = layers - k; i < layers; ++i)
		t[i] = true;
	return LayerMask(std::move(t));
}

std::size_t LayerMask::trainable_count() const {
	return static_cast<std::size_t>(std::count(trainable_.begin(), trainable_.end(), true));
}

std::size_t LayerMask::first_trainable() const {
	for (std::size_t i = 0; i < trainable_.size(); ++i)
		if (trainable_[i])
			return i;
	return trainable_.size();
}

namespace {

inline double activate(Activation a, double v) {
	return a == Activation::relu ? (v > 0.0 ? v : 0.0) : v;
}

inline double activate_grad(Activation a, double pre) {
	return a == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0;
}

void affine(const Layer &l, std::span<const double> in, Vector &out) {
	out.assign(l.bias.begin(), l.bias.end());
	for (std::size_t r = 0; r < l.out; ++r) {
		const double *row = l.weights.data() + r * l.in;
		double acc = 0.0;
		for (std::size_t c = 0; c < l.in; ++c)
			acc += row[c] * in[c];
		out[r] += acc;
	}
}

void check_input(const LayeredModel &model, std::span<const double> x) {
	if (x.size() != model.input_dim())
		throw ShapeError("input has dimension " + std::to_string(x.size()) + ", model expects " +
		                 std::to_string(model.input_dim()));
}

// Activations of every layer for one sample: acts[0] = x, pre[i] = pre-activation of layer i.
struct Trace {
	std::vector<Vector> acts;
	std::vector<Vector> pre;
};

void run_forward(const LayeredModel &model, std::span<const double> x, Trace &t) {
	const auto &layers = model.layers();
	t.acts.resize(layers.size() + 1);
	t.pre.resize(layers.size());
	t.acts[0].assign(x.begin(), x.end());
	for (std::size_t i = 0; i < layers.size(); ++i) {
		affine(layers[i], t.acts[i], t.pre[i]);
		auto &a = t.acts[i + 1];
		a = t.pre[i];
		if (i + 1 < layers.size())
			for (auto &v : a)
				v = activate(model.activation(), v);
	}
}

// Gradient of the loss with respect to the logits for one sample.
Vector logit_gradient(std::span<const double> logits, const BatchItem &item, LossKind kind) {
	const std::size_t c = logits.size();
	Vector g(c, 0.0);
	if (kind == LossKind::task || kind == LossKind::task_plus_kl) {
		if (item.label < 0 || static_cast<std::size_t>(item.label) >= c)
			throw DataError("label " + std::to_string(item.label) + " out of range");
		auto p = softmax(logits);
		for (std::size_t i = 0; i < c; ++i)
			g[i] += p[i];
		g[static_cast<std::size_t>(item.label)] -= 1.0;
	}
	if (kind == LossKind::kl_to_teacher || kind == LossKind::task_plus_kl) {
		if (item.teacher_logits.size() != c)
			throw ShapeError("teacher logits missing or of the wrong length");
		auto lp = log_softmax(logits);
		auto lq = log_softmax(item.teacher_logits);
		double kl = 0.0;
		Vector p(c);
		for (std::size_t i = 0; i < c; ++i) {
			p[i] = std::exp(lp[i]);
			kl += p[i] * (lp[i] - lq[i]);
		}
		for (std::size_t i = 0; i < c; ++i)
			g[i] += p[i] * (lp[i] - lq[i] - kl);
	}
	return g;
}

} // namespace

Vector forward(const LayeredModel &model, std::span<const double> x) {
	check_input(model, x);
	const auto &layers = model.layers();
	Vector cur(x.begin(), x.end());
	Vector next;
	for (std::size_t i = 0; i < layers.size(); ++i) {
		affine(layers[i], cur, next);
		if (i + 1 < layers.size())
			for (auto &v : next)
				v = activate(model.activation(), v);
		cur.swap(next);
	}
	return cur;
}

int predict(const LayeredModel &model, std::span<const double> x) {
	auto logits = forward(model, x);
	return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

Vector log_softmax(std::span<const double> logits) {
	double m = *std::max_element(logits.begin(), logits.end());
	double s = 0.0;
	for (double v : logits)
		s += std::exp(v - m);
	double lse = m + std::log(s);
	Vector out(logits.size());
	for (std::size_t i = 0; i < logits.size(); ++i)
		out[i] = logits[i] - lse;
	return out;
}

Vector softmax(std::span<const double> logits) {
	auto out = log_softmax(logits);
	for (auto &v : out)
		v = std::exp(v);
	return out;
}

double cross_entropy(std::span<const double> logits, int label) {
	if (logits.empty())
		throw ShapeError("empty logits");
	if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
		throw DataError("label " + std::to_string(label) + " out of range [0, " +
		                std::to_string(logits.size()) + ")");
	double loss = -log_softmax(logits)[static_cast<std::size_t>(label)];
	return loss < 0.0 ? 0.0 : loss;
}

double kl_divergence(std::span<const double> p_logits, std::span<const double> q_logits) {
	if (p_logits.size() != q_logits.size() || p_logits.empty())
		throw ShapeError("kl_divergence needs two non-empty logit vectors of equal length");
	auto lp = log_softmax(p_logits);
	auto lq = log_softmax(q_logits);
	double kl = 0.0;
	for (std::size_t i = 0; i < lp.size(); ++i)
		kl += std::exp(lp[i]) * (lp[i] - lq[i]);
	return kl < 0.0 ? 0.0 : kl;
}

double entropy(std::span<const double> logits) {
	auto lp = log_softmax(logits);
	double h = 0.0;
	for (double v : lp)
		h -= std::exp(v) * v;
	return h;
}

GradientSet backward(const LayeredModel &model, std::span<const BatchItem> batch, LossKind kind,
                     const LayerMask &mask) {
	if (batch.empty())
		throw DataError("backward called with an empty batch");
	const auto &layers = model.layers();
	if (mask.size() != layers.size())
		throw ShapeError("layer mask length does not match the model");
	const std::size_t first = mask.first_trainable();
	if (first == layers.size())
		throw ConfigError("layer mask freezes every layer");

	GradientSet grads;
	grads.batch_size = batch.size();
	grads.layers.resize(layers.size());
	for (std::size_t i = 0; i < layers.size(); ++i) {
		grads.layers[i].weights.assign(layers[i].weights.size(), 0.0);
		grads.layers[i].bias.assign(layers[i].bias.size(), 0.0);
	}

	Trace t;
	Vector delta, prev_delta;
	for (const auto &item : batch) {
		check_input(model, item.x);
		run_forward(model, item.x, t);
		delta = logit_gradient(t.acts.back(), item, kind);
		for (std::size_t li = layers.size(); li-- > first;) {
			const auto &l = layers[li];
			if (mask.trainable(li)) {
				auto &g = grads.layers[li];
				const auto &in = t.acts[li];
				for (std::size_t r = 0; r < l.out; ++r) {
					double d = delta[r];
					if (d == 0.0)
						continue;
					double *grow = g.weights.data() + r * l.in;
					for (std::size_t c = 0; c < l.in; ++c)
						grow[c] += d * in[c];
					g.bias[r] += d;
				}
			}
			if (li == first)
				break;
			prev_delta.assign(l.in, 0.0);
			for (std::size_t r = 0; r < l.out; ++r) {
				double d = delta[r];
				if (d == 0.0)
					continue;
				const double *row = l.weights.data() + r * l.in;
				for (std::size_t c = 0; c < l.in; ++c)
					prev_delta[c] += d * row[c];
			}
			const auto &pre = t.pre[li - 1];
			for (std::size_t c = 0; c < l.in; ++c)
				prev_delta[c] *= activate_grad(model.activation(), pre[c]);
			delta.swap(prev_delta);
		}
	}

	const double scale = 1.0 / static_cast<double>(batch.size());
	for (auto &g : grads.layers) {
		for (auto &v : g.weights)
			v *= scale;
		for (auto &v : g.bias)
			v *= scale;
	}
	return grads;
}

Vector input_gradient(const LayeredModel &model, std::span<const double> x, int label) {
	check_input(model, x);
	const auto &layers = model.layers();
	Trace t;
	run_forward(model, x, t);
	BatchItem item{x, label, {}};
	Vector delta = logit_gradient(t.acts.back(), item, LossKind::task);
	Vector prev;
	for (std::size_t li = layers.size(); li-- > 0;) {
		const auto &l = layers[li];
		prev.assign(l.in, 0.0);
		for (std::size_t r = 0; r < l.out; ++r) {
			const double *row = l.weights.data() + r * l.in;
			for (std::size_t c = 0; c < l.in; ++c)
				prev[c] += delta[r] * row[c];
		}
		if (li > 0) {
			const auto &pre = t.pre[li - 1];
			for (std::size_t c = 0; c < l.in; ++c)
				prev[c] *= activate_grad(model.activation(), pre[c]);
		}
		delta.swap(prev);
	}
	return delta;
}

void apply_step(LayeredModel &model, const GradientSet &grads, double lr, Direction direction) {
	auto &layers = model.layers();
	if (grads.layers.size() != layers.size())
		throw ShapeError("gradient set does not match the model");
	const double sign = direction == Direction::descent ? -lr : lr;
	for (std::size_t i = 0; i < layers.size(); ++i) {
		const auto &l = layers[i];
		const auto &g = grads.layers[i];
		if (g.weights.size() != l.weights.size() || g.bias.size() != l.bias.size())
			throw ShapeError("gradient set does not match the model");
		for (std::size_t j = 0; j < l.weights.size(); ++j)
			if (!std::isfinite(l.weights[j] + sign * g.weights[j]))
				throw NumericOverflowError("non-finite weight after update in layer " + std::to_string(i));
		for (std::size_t j = 0; j < l.bias.size(); ++j)
			if (!std::isfinite(l.bias[j] + sign * g.bias[j]))
				throw NumericOverflowError("non-finite bias after update in layer " + std::to_string(i));
	}
	if (lr == 0.0)
		return;
	for (std::size_t i = 0; i < layers.size(); ++i) {
		auto &l = layers[i];
		const auto &g = grads.layers[i];
		for (std::size_t j = 0; j < l.weights.size(); ++j)
			l.weights[j] += sign * g.weights[j];
		for (std::size_t j = 0; j < l.bias.size(); ++j)
			l.bias[j] += sign * g.bias[j];
	}
}

LayeredModel init_model(const ModelDims &dims, std::uint64_t seed, Activation activation) {
	if (dims.input < 1 || dims.classes < 1)
		throw ConfigError("model dimensions must be at least 1");
	if (dims.classes < 2)
		throw ConfigError("class count must be at least 2");
	for (auto h : dims.hidden)
		if (h < 1)
			throw ConfigError("hidden dimensions must be at least 1");

	std::mt19937_64 rng(seed);
	std::vector<Layer> layers;
	std::size_t prev = dims.input;
	for (std::size_t i = 0; i < dims.layer_count(); ++i) {
		std::size_t out = i < dims.hidden.size() ? dims.hidden[i] : dims.classes;
		Layer l;
		l.in = prev;
		l.out = out;
		double limit = std::sqrt(6.0 / static_cast<double>(prev + out));
		std::uniform_real_distribution<double> dist(-limit, limit);
		l.weights.resize(prev * out);
		for (auto &w : l.weights)
			w = dist(rng);
		l.bias.assign(out, 0.0);
		layers.push_back(std::move(l));
		prev = out;
	}
	return LayeredModel(dims, activation, std::move(layers), seed);
}

double forward_macs(const LayeredModel &model) {
	double n = 0.0;
	for (const auto &l : model.layers())
		n += static_cast<double>(l.in * l.out);
	return n;
}

double backward_macs(const LayeredModel &model, const LayerMask &mask) {
	// Weight gradients for trainable layers plus delta propagation down to the first trainable one.
	const auto &layers = model.layers();
	std::size_t first = mask.first_trainable();
	double n = 0.0;
	for (std::size_t i = first; i < layers.size(); ++i) {
		double macs = static_cast<double>(layers[i].in * layers[i].out);
		if (mask.trainable(i))
			n += macs;
		if (i > first)
			n += macs;
	}
	return n;
}

} // namespace unbench
