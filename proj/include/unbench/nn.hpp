#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace unbench {

using Vector = std::vector<double>;

enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string &name);

/// Shape of an MLP classifier: input -> hidden... -> classes.
struct ModelDims {
	std::size_t input = 0;
	std::vector<std::size_t> hidden;
	std::size_t classes = 0;

	std::size_t layer_count() const {
		return hidden.size() + 1;
	}
	bool operator==(const ModelDims &) const = default;
};

/// One affine layer; weights are out x in, row-major.
struct Layer {
	std::size_t in = 0;
	std::size_t out = 0;
	Vector weights;
	Vector bias;

	double &w(std::size_t row, std::size_t col) {
		return weights[row * in + col];
	}
	double w(std::size_t row, std::size_t col) const {
		return weights[row * in + col];
	}
	bool operator==(const Layer &) const = default;
};

class LayeredModel {
public:
	LayeredModel() = default;
	LayeredModel(ModelDims dims, Activation activation, std::vector<Layer> layers,
	             std::optional<std::uint64_t> seed = std::nullopt);

	const ModelDims &dims() const {
		return dims_;
	}
	Activation activation() const {
		return activation_;
	}
	std::optional<std::uint64_t> seed() const {
		return seed_;
	}
	std::size_t layer_count() const {
		return layers_.size();
	}
	std::size_t input_dim() const {
		return dims_.input;
	}
	std::size_t class_count() const {
		return dims_.classes;
	}
	const std::vector<Layer> &layers() const {
		return layers_;
	}
	std::vector<Layer> &layers() {
		return layers_;
	}
	std::size_t parameter_count() const;
	bool all_finite() const;

	/// Throws ShapeError / ConfigError if the layer stack is inconsistent.
	void validate() const;

	bool operator==(const LayeredModel &) const = default;

private:
	ModelDims dims_;
	Activation activation_ = Activation::relu;
	std::vector<Layer> layers_;
	std::optional<std::uint64_t> seed_;
};

struct LayerGradient {
	Vector weights;
	Vector bias;
};

struct GradientSet {
	std::vector<LayerGradient> layers;
	std::size_t batch_size = 0;

	GradientSet &operator+=(const GradientSet &other);
	bool all_finite() const;
};

/// Which layers receive updates.
class LayerMask {
public:
	explicit LayerMask(std::vector<bool> trainable) : trainable_(std::move(trainable)) {
	}
	static LayerMask all(std::size_t layers);
	/// Only the final k layers are trainable.
	static LayerMask last_k(std::size_t layers, std::size_t k);

	bool trainable(std::size_t layer) const {
		return trainable_.at(layer);
	}
	std::size_t size() const {
		return trainable_.size();
	}
	std::size_t trainable_count() const;
	/// Index of the lowest trainable layer; size() if none.
	std::size_t first_trainable() const;

private:
	std::vector<bool> trainable_;
};

enum class LossKind {
	task,          // cross-entropy against the label
	kl_to_teacher, // KL(student || teacher)
	task_plus_kl,  // sum of both
};

enum class Direction { descent, ascent };

/// A batch element. teacher_logits is only read for the KL loss kinds.
struct BatchItem {
	std::span<const double> x;
	int label = 0;
	std::span<const double> teacher_logits;
};

Vector forward(const LayeredModel &model, std::span<const double> x);
int predict(const LayeredModel &model, std::span<const double> x);

Vector softmax(std::span<const double> logits);
Vector log_softmax(std::span<const double> logits);
double cross_entropy(std::span<const double> logits, int label);
/// KL(softmax(p) || softmax(q)).
double kl_divergence(std::span<const double> p_logits, std::span<const double> q_logits);
double entropy(std::span<const double> logits);

/// Mean gradient of the chosen loss over the batch. Frozen layers get exact zeros.
GradientSet backward(const LayeredModel &model, std::span<const BatchItem> batch, LossKind kind,
                     const LayerMask &mask);

/// Gradient of cross_entropy(forward(model, x), label) with respect to x.
Vector input_gradient(const LayeredModel &model, std::span<const double> x, int label);

/// In place: descent subtracts lr*grad, ascent adds it. Leaves the model untouched and
/// throws NumericOverflowError if any updated entry would be non-finite.
void apply_step(LayeredModel &model, const GradientSet &grads, double lr, Direction direction);

/// Glorot-uniform weights, zero biases. Deterministic in seed.
LayeredModel init_model(const ModelDims &dims, std::uint64_t seed, Activation activation = Activation::relu);

/// Multiply-accumulate counts, used by the work-based clock.
double forward_macs(const LayeredModel &model);
double backward_macs(const LayeredModel &model, const LayerMask &mask);

// Checkpoints (versioned JSON text).
std::string model_to_json(const LayeredModel &model);
LayeredModel model_from_json(const std::string &text);
void save_model(const LayeredModel &model, const std::string &path);
LayeredModel load_model(const std::string &path);

} // namespace unbench
