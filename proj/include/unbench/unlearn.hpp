#pragma once

#include "unbench/datagen.hpp"
#include "unbench/nn.hpp"

#include <chrono>
#include <cstdint>
#include <span>
#include <string>

namespace unbench {

enum class Method { ft, ng, ng_plus, cf_k, unsir, bt, bt_light, scrub, original, gold };

/// Exact identifiers used in configs, reports and on the command line.
std::string method_id(Method m);
Method method_from_id(const std::string &id);
bool is_baseline(Method m);
/// The eight unlearning methods in reporting order.
std::span<const Method> unlearning_methods();

struct MethodConfig {
	Method method = Method::ft;
	double lr = 1e-5;
	int epochs = 1;
	std::size_t batch_size = 32;
	std::size_t k = 1;            // cf_k
	int noise_steps = 20;         // unsir
	double noise_lr = 0.1;        // unsir
	int scrub_max_steps = 2;      // scrub
	int scrub_min_steps = 2;      // scrub
	double retain_weight = 1.0;   // ng_plus: weight on the forget ascent term
	std::uint64_t seed = 0;

	void validate(std::size_t layer_count) const;
	bool operator==(const MethodConfig &) const = default;
};

/// Shared by original and gold training.
struct TrainRecipe {
	std::vector<std::size_t> hidden{128, 128};
	int epochs = 60;
	double lr = 0.05;
	std::size_t batch_size = 32;
	std::uint64_t seed = 0;
	std::string optimizer = "sgd";

	void validate() const;
	bool operator==(const TrainRecipe &) const = default;
};

/// Time source for one run. charge() reports work in multiply-accumulates; the real clock
/// ignores it, the work clock turns it into simulated seconds.
class Clock {
public:
	virtual ~Clock() = default;
	virtual double now() = 0;
	virtual void charge(double macs) {
		(void)macs;
	}
};

class SteadyClock final : public Clock {
public:
	double now() override {
		return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
	}
};

/// Deterministic clock: time advances only through charged work.
class WorkClock final : public Clock {
public:
	explicit WorkClock(double seconds_per_mac = 1e-9) : seconds_per_mac_(seconds_per_mac) {
	}
	double now() override {
		return elapsed_;
	}
	void charge(double macs) override {
		elapsed_ += macs * seconds_per_mac_;
	}

private:
	double seconds_per_mac_;
	double elapsed_ = 0.0;
};

/// Read-only view over samples that can count every element access.
class DataView {
public:
	DataView() = default;
	DataView(std::span<const Sample> samples, std::size_t *access_counter = nullptr)
	    : samples_(samples), counter_(access_counter) {
	}
	std::size_t size() const {
		return samples_.size();
	}
	bool empty() const {
		return samples_.empty();
	}
	const Sample &operator[](std::size_t i) const {
		if (counter_)
			++*counter_;
		return samples_[i];
	}

private:
	std::span<const Sample> samples_;
	std::size_t *counter_ = nullptr;
};

struct TrainResult {
	LayeredModel model;
	double elapsed = 0.0;
};

struct UnlearnOutcome {
	LayeredModel model;
	double elapsed = 0.0;
	MethodConfig config;
};

/// Shuffled mini-batch SGD on cross-entropy from a fresh initialization. Throws
/// TrainingDivergedError (with epoch and batch) on non-finite updates.
TrainResult train_original(const TrainRecipe &recipe, std::size_t input_dim, std::size_t classes,
                           const DataView &data, Clock &clock);

UnlearnOutcome finetune(const LayeredModel &model, const DataView &retain, const MethodConfig &cfg, Clock &clock);
UnlearnOutcome neg_grad(const LayeredModel &model, const DataView &forget, const MethodConfig &cfg, Clock &clock);
UnlearnOutcome neg_grad_plus(const LayeredModel &model, const DataView &retain, const DataView &forget,
                             const MethodConfig &cfg, Clock &clock);
UnlearnOutcome cf_k(const LayeredModel &model, const DataView &retain, const MethodConfig &cfg, Clock &clock);

/// Error-maximizing input for `label`: gradient ascent on the loss w.r.t. the input,
/// starting from a seeded standard normal draw.
Vector synthesize_noise(const LayeredModel &model, int label, std::size_t dim, int steps, double noise_lr,
                        std::uint64_t seed, Clock *clock = nullptr);

/// `impaired`, when given, receives the model after each epoch's impair phase.
UnlearnOutcome unsir(const LayeredModel &model, const DataView &retain, const DataView &forget,
                     const MethodConfig &cfg, Clock &clock, std::vector<LayeredModel> *impaired = nullptr);

enum class IncompetentTeacher { frozen_model, uniform };

UnlearnOutcome bad_teaching(const LayeredModel &model, const DataView &retain, const DataView &forget,
                            const MethodConfig &cfg, IncompetentTeacher incompetent, Clock &clock);
UnlearnOutcome scrub(const LayeredModel &model, const DataView &retain, const DataView &forget,
                     const MethodConfig &cfg, Clock &clock);

/// Dispatch on cfg.method (unlearning methods only).
UnlearnOutcome run_unlearning(const LayeredModel &model, const DataView &retain, const DataView &forget,
                              const MethodConfig &cfg, Clock &clock);

} // namespace unbench
