#include "unbench/unlearn.hpp"

#include "unbench/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>

namespace unbench {

namespace {

constexpr std::array<Method, 8> kUnlearning = {Method::ft,    Method::ng, Method::ng_plus,  Method::cf_k,
                                                Method::unsir, Method::bt, Method::bt_light, Method::scrub};

// Seed salts so that independent random streams of one run never coincide.
constexpr std::uint64_t kForgetStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kNoiseStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kTeacherStream = 0x94d049bb133111ebULL;

constexpr double kMinElapsed = 1e-9;

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64 &rng) {
	std::vector<std::size_t> idx(n);
	std::iota(idx.begin(), idx.end(), std::size_t{0});
	std::shuffle(idx.begin(), idx.end(), rng);
	return idx;
}

void require_method(const MethodConfig &cfg, std::initializer_list<Method> allowed, const char *op) {
	if (std::find(allowed.begin(), allowed.end(), cfg.method) == allowed.end())
		throw ConfigError(std::string(op) + " called with method '" + method_id(cfg.method) + "'");
}

// Produces teacher logits for a sample, or nothing for plain task loss.
using TeacherFn = std::function<Vector(const Sample &)>;

/// Mini-batch SGD on a working model, charging the clock for every forward and backward.
class Stepper {
public:
	Stepper(LayeredModel &model, const LayerMask &mask, Clock &clock, std::string context)
	    : model_(model), mask_(mask), clock_(clock), context_(std::move(context)),
	      fwd_(forward_macs(model)), bwd_(backward_macs(model, mask)) {
	}

	void step(std::span<const Sample *const> samples, LossKind kind, const TeacherFn &teacher, double lr,
	          Direction dir) {
		items_.clear();
		teacher_logits_.clear();
		teacher_logits_.reserve(samples.size());
		for (const Sample *s : samples) {
			if (teacher) {
				teacher_logits_.push_back(teacher(*s));
				clock_.charge(fwd_);
			}
		}
		for (std::size_t i = 0; i < samples.size(); ++i) {
			std::span<const double> t;
			if (teacher)
				t = teacher_logits_[i];
			items_.push_back(BatchItem{samples[i]->x, samples[i]->y, t});
		}
		auto grads = backward(model_, items_, kind, mask_);
		clock_.charge(static_cast<double>(samples.size()) * (fwd_ + bwd_));
		if (!grads.all_finite())
			throw NumericOverflowError(context_ + ": non-finite gradient");
		try {
			apply_step(model_, grads, lr, dir);
		} catch (const NumericOverflowError &e) {
			throw NumericOverflowError(context_ + ": " + e.what());
		}
	}

	void pass(const DataView &data, std::size_t batch_size, std::mt19937_64 &rng, LossKind kind,
	          const TeacherFn &teacher, double lr, Direction dir) {
		if (data.empty())
			return;
		auto order = shuffled_indices(data.size(), rng);
		std::vector<const Sample *> batch;
		for (std::size_t start = 0; start < order.size(); start += batch_size) {
			batch.clear();
			for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i)
				batch.push_back(&data[order[i]]);
			step(batch, kind, teacher, lr, dir);
		}
	}

private:
	LayeredModel &model_;
	const LayerMask &mask_;
	Clock &clock_;
	std::string context_;
	double fwd_;
	double bwd_;
	std::vector<BatchItem> items_;
	std::vector<Vector> teacher_logits_;
};

template <typename Body>
UnlearnOutcome timed(const LayeredModel &model, const MethodConfig &cfg, Clock &clock, Body body) {
	double start = clock.now();
	LayeredModel student = model;
	body(student);
	double elapsed = clock.now() - start;
	return UnlearnOutcome{std::move(student), std::max(elapsed, kMinElapsed), cfg};
}

void descend_epochs(LayeredModel &m, const DataView &data, const MethodConfig &cfg, const LayerMask &mask,
                    Clock &clock, const std::string &context) {
	std::mt19937_64 rng(cfg.seed);
	Stepper st(m, mask, clock, context);
	for (int e = 0; e < cfg.epochs; ++e)
		st.pass(data, cfg.batch_size, rng, LossKind::task, {}, cfg.lr, Direction::descent);
}

} // namespace

std::string method_id(Method m) {
	switch (m) {
	case Method::ft:
		return "ft";
	case Method::ng:
		return "ng";
	case Method::ng_plus:
		return "ng_plus";
	case Method::cf_k:
		return "cf_k";
	case Method::unsir:
		return "unsir";
	case Method::bt:
		return "bt";
	case Method::bt_light:
		return "bt_light";
	case Method::scrub:
		return "scrub";
	case Method::original:
		return "original";
	case Method::gold:
		return "gold";
	}
	return "?";
}

Method method_from_id(const std::string &id) {
	for (Method m : {Method::ft, Method::ng, Method::ng_plus, Method::cf_k, Method::unsir, Method::bt,
	                 Method::bt_light, Method::scrub, Method::original, Method::gold})
		if (method_id(m) == id)
			return m;
	throw ConfigError("unknown method '" + id + "'");
}

bool is_baseline(Method m) {
	return m == Method::original || m == Method::gold;
}

std::span<const Method> unlearning_methods() {
	return kUnlearning;
}

void MethodConfig::validate(std::size_t layer_count) const {
	if (is_baseline(method))
		throw ConfigError("'" + method_id(method) + "' is a baseline, not an unlearning method");
	if (!(std::isfinite(lr) && lr >= 0.0))
		throw ConfigError("lr must be finite and non-negative");
	if (epochs < 0)
		throw ConfigError("epochs must be non-negative");
	if (batch_size < 1)
		throw ConfigError("batch_size must be at least 1");
	if (method == Method::cf_k && (k < 1 || k > layer_count))
		throw ConfigError("cf_k requires 1 <= k <= " + std::to_string(layer_count) + ", got k = " +
		                  std::to_string(k));
	if (method == Method::unsir && (noise_steps < 0 || !std::isfinite(noise_lr)))
		throw ConfigError("unsir noise_steps must be >= 0 and noise_lr finite");
	if (method == Method::scrub && (scrub_max_steps < 0 || scrub_min_steps < 0))
		throw ConfigError("scrub step counts must be non-negative");
	if (method == Method::ng_plus && !(std::isfinite(retain_weight) && retain_weight >= 0.0))
		throw ConfigError("ng_plus retain_weight must be finite and non-negative");
}

void TrainRecipe::validate() const {
	if (epochs < 1)
		throw ConfigError("training epochs must be at least 1");
	if (!(std::isfinite(lr) && lr > 0.0))
		throw ConfigError("training lr must be positive");
	if (batch_size < 1)
		throw ConfigError("training batch_size must be at least 1");
	if (optimizer != "sgd")
		throw ConfigError("unsupported optimizer '" + optimizer + "'");
}

TrainResult train_original(const TrainRecipe &recipe, std::size_t input_dim, std::size_t classes,
                           const DataView &data, Clock &clock) {
	recipe.validate();
	if (data.empty())
		throw DataError("cannot train on an empty dataset");
	ModelDims dims{input_dim, recipe.hidden, classes};
	double start = clock.now();
	LayeredModel model = init_model(dims, recipe.seed);
	auto mask = LayerMask::all(model.layer_count());
	std::mt19937_64 rng(recipe.seed);
	const double fwd = forward_macs(model), bwd = backward_macs(model, mask);

	std::vector<BatchItem> items;
	for (int e = 0; e < recipe.epochs; ++e) {
		auto order = shuffled_indices(data.size(), rng);
		int b = 0;
		for (std::size_t start_i = 0; start_i < order.size(); start_i += recipe.batch_size, ++b) {
			items.clear();
			for (std::size_t i = start_i; i < std::min(order.size(), start_i + recipe.batch_size); ++i) {
				const Sample &s = data[order[i]];
				items.push_back(BatchItem{s.x, s.y, {}});
			}
			auto grads = backward(model, items, LossKind::task, mask);
			clock.charge(static_cast<double>(items.size()) * (fwd + bwd));
			if (!grads.all_finite())
				throw TrainingDivergedError("training diverged at epoch " + std::to_string(e) + ", batch " +
				                                std::to_string(b),
				                            e, b);
			try {
				apply_step(model, grads, recipe.lr, Direction::descent);
			} catch (const NumericOverflowError &) {
				throw TrainingDivergedError("training diverged at epoch " + std::to_string(e) + ", batch " +
				                                std::to_string(b),
				                            e, b);
			}
		}
	}
	double elapsed = clock.now() - start;
	return TrainResult{std::move(model), std::max(elapsed, kMinElapsed)};
}

UnlearnOutcome finetune(const LayeredModel &model, const DataView &retain, const MethodConfig &cfg, Clock &clock) {
	require_method(cfg, {Method::ft}, "finetune");
	cfg.validate(model.layer_count());
	return timed(model, cfg, clock, [&](LayeredModel &m) {
		descend_epochs(m, retain, cfg, LayerMask::all(m.layer_count()), clock, "ft");
	});
}

UnlearnOutcome neg_grad(const LayeredModel &model, const DataView &forget, const MethodConfig &cfg, Clock &clock) {
	require_method(cfg, {Method::ng}, "neg_grad");
	cfg.validate(model.layer_count());
	return timed(model, cfg, clock, [&](LayeredModel &m) {
		std::mt19937_64 rng(cfg.seed ^ kForgetStream);
		auto mask = LayerMask::all(m.layer_count());
		Stepper st(m, mask, clock, "ng");
		for (int e = 0; e < cfg.epochs; ++e)
			st.pass(forget, cfg.batch_size, rng, LossKind::task, {}, cfg.lr, Direction::ascent);
	});
}

UnlearnOutcome neg_grad_plus(const LayeredModel &model, const DataView &retain, const DataView &forget,
                             const MethodConfig &cfg, Clock &clock) {
	require_method(cfg, {Method::ng_plus}, "neg_grad_plus");
	cfg.validate(model.layer_count());
	return timed(model, cfg, clock, [&](LayeredModel &m) {
		// Retain batches follow the same stream as finetune, so gamma = 0 reproduces it exactly.
		std::mt19937_64 retain_rng(cfg.seed);
		std::mt19937_64 forget_rng(cfg.seed ^ kForgetStream);
		auto mask = LayerMask::all(m.layer_count());
		Stepper st(m, mask, clock, "ng_plus");
		const bool ascend = cfg.retain_weight > 0.0 && !forget.empty();
		const std::size_t bs = cfg.batch_size;
		std::vector<const Sample *> batch;
		auto take = [&](const DataView &data, const std::vector<std::size_t> &order, std::size_t b) {
			batch.clear();
			for (std::size_t i = b * bs; i < std::min(order.size(), (b + 1) * bs); ++i)
				batch.push_back(&data[order[i]]);
		};
		for (int e = 0; e < cfg.epochs; ++e) {
			// One descent pass over retain and one ascent pass over forget, the forget batches
			// spread evenly between the retain batches.
			auto retain_order = shuffled_indices(retain.size(), retain_rng);
			std::vector<std::size_t> forget_order;
			if (ascend)
				forget_order = shuffled_indices(forget.size(), forget_rng);
			const std::size_t nr = (retain.size() + bs - 1) / bs;
			const std::size_t nf = ascend ? (forget.size() + bs - 1) / bs : 0;
			std::size_t done_f = 0;
			auto ascend_until = [&](std::size_t target) {
				for (; done_f < target; ++done_f) {
					take(forget, forget_order, done_f);
					st.step(batch, LossKind::task, {}, cfg.lr * cfg.retain_weight, Direction::ascent);
				}
			};
			for (std::size_t b = 0; b < nr; ++b) {
				take(retain, retain_order, b);
				st.step(batch, LossKind::task, {}, cfg.lr, Direction::descent);
				ascend_until((b + 1) * nf / nr);
			}
			ascend_until(nf);
		}
	});
}

UnlearnOutcome cf_k(const LayeredModel &model, const DataView &retain, const MethodConfig &cfg, Clock &clock) {
	require_method(cfg, {Method::cf_k}, "cf_k");
	cfg.validate(model.layer_count());
	return timed(model, cfg, clock, [&](LayeredModel &m) {
		descend_epochs(m, retain, cfg, LayerMask::last_k(m.layer_count(), cfg.k), clock, "cf_k");
	});
}

Vector synthesize_noise(const LayeredModel &model, int label, std::size_t dim, int steps, double noise_lr,
                        std::uint64_t seed, Clock *clock) {
	if (steps < 0)
		throw ConfigError("noise steps must be non-negative");
	if (dim != model.input_dim())
		throw ShapeError("noise dimension does not match the model input");
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> gauss(0.0, 1.0);
	Vector x(dim);
	for (auto &v : x)
		v = gauss(rng);
	const double cost = forward_macs(model) + backward_macs(model, LayerMask::all(model.layer_count())) +
	                    static_cast<double>(model.layers().front().in * model.layers().front().out);
	for (int s = 0; s < steps; ++s) {
		auto g = input_gradient(model, x, label);
		if (clock)
			clock->charge(cost);
		for (std::size_t j = 0; j < dim; ++j) {
			x[j] += noise_lr * g[j];
			if (!std::isfinite(x[j]))
				throw NumericOverflowError("unsir: non-finite noise at step " + std::to_string(s));
		}
	}
	return x;
}

UnlearnOutcome unsir(const LayeredModel &model, const DataView &retain, const DataView &forget,
                     const MethodConfig &cfg, Clock &clock, std::vector<LayeredModel> *impaired) {
	require_method(cfg, {Method::unsir}, "unsir");
	cfg.validate(model.layer_count());
	return timed(model, cfg, clock, [&](LayeredModel &m) {
		auto mask = LayerMask::all(m.layer_count());
		Stepper st(m, mask, clock, "unsir");
		std::mt19937_64 rng(cfg.seed);
		for (int e = 0; e < cfg.epochs; ++e) {
			// Impair: retain plus one error-maximizing noise sample per forget sample, forget labels kept.
			std::vector<Sample> impair;
			impair.reserve(retain.size() + forget.size());
			for (std::size_t i = 0; i < retain.size(); ++i)
				impair.push_back(retain[i]);
			for (std::size_t i = 0; i < forget.size(); ++i) {
				const Sample &f = forget[i];
				std::uint64_t seed = (cfg.seed ^ kNoiseStream) + static_cast<std::uint64_t>(e) * forget.size() + i;
				Sample n;
				n.x = synthesize_noise(m, f.y, m.input_dim(), cfg.noise_steps, cfg.noise_lr, seed, &clock);
				n.y = f.y;
				n.s = -1;
				impair.push_back(std::move(n));
			}
			st.pass(DataView(impair), cfg.batch_size, rng, LossKind::task, {}, cfg.lr, Direction::descent);
			if (impaired)
				impaired->push_back(m);
			// Repair.
			st.pass(retain, cfg.batch_size, rng, LossKind::task, {}, cfg.lr, Direction::descent);
		}
	});
}

UnlearnOutcome bad_teaching(const LayeredModel &model, const DataView &retain, const DataView &forget,
                            const MethodConfig &cfg, IncompetentTeacher incompetent, Clock &clock) {
	require_method(cfg, {Method::bt, Method::bt_light}, "bad_teaching");
	cfg.validate(model.layer_count());
	return timed(model, cfg, clock, [&](LayeredModel &m) {
		const LayeredModel competent = model;
		std::optional<LayeredModel> bad;
		if (incompetent == IncompetentTeacher::frozen_model)
			bad = init_model(model.dims(), cfg.seed ^ kTeacherStream, model.activation());
		const Vector uniform(model.class_count(), 0.0);

		// Retain and forget samples share one shuffled stream; the source picks the teacher.
		std::vector<std::pair<bool, std::size_t>> pool;
		pool.reserve(retain.size() + forget.size());
		for (std::size_t i = 0; i < retain.size(); ++i)
			pool.emplace_back(false, i);
		for (std::size_t i = 0; i < forget.size(); ++i)
			pool.emplace_back(true, i);

		auto mask = LayerMask::all(m.layer_count());
		std::mt19937_64 rng(cfg.seed);
		std::vector<BatchItem> items;
		std::vector<Vector> targets;
		const double fwd = forward_macs(model), bwd = backward_macs(model, mask);
		for (int e = 0; e < cfg.epochs; ++e) {
			std::shuffle(pool.begin(), pool.end(), rng);
			for (std::size_t start = 0; start < pool.size(); start += cfg.batch_size) {
				items.clear();
				targets.clear();
				const std::size_t end = std::min(pool.size(), start + cfg.batch_size);
				targets.reserve(end - start);
				for (std::size_t i = start; i < end; ++i) {
					auto [is_forget, idx] = pool[i];
					const Sample &s = is_forget ? forget[idx] : retain[idx];
					if (!is_forget)
						targets.push_back(forward(competent, s.x));
					else if (bad)
						targets.push_back(forward(*bad, s.x));
					else
						targets.push_back(uniform);
					if (!is_forget || bad)
						clock.charge(fwd);
					items.push_back(BatchItem{s.x, s.y, targets.back()});
				}
				auto grads = backward(m, items, LossKind::kl_to_teacher, mask);
				clock.charge(static_cast<double>(items.size()) * (fwd + bwd));
				if (!grads.all_finite())
					throw NumericOverflowError(method_id(cfg.method) + ": non-finite gradient");
				try {
					apply_step(m, grads, cfg.lr, Direction::descent);
				} catch (const NumericOverflowError &err) {
					throw NumericOverflowError(method_id(cfg.method) + ": " + err.what());
				}
			}
		}
	});
}

UnlearnOutcome scrub(const LayeredModel &model, const DataView &retain, const DataView &forget,
                     const MethodConfig &cfg, Clock &clock) {
	require_method(cfg, {Method::scrub}, "scrub");
	cfg.validate(model.layer_count());
	return timed(model, cfg, clock, [&](LayeredModel &m) {
		const LayeredModel teacher = model;
		TeacherFn teach = [&teacher](const Sample &s) { return forward(teacher, s.x); };
		auto mask = LayerMask::all(m.layer_count());
		Stepper st(m, mask, clock, "scrub");
		std::mt19937_64 retain_rng(cfg.seed);
		std::mt19937_64 forget_rng(cfg.seed ^ kForgetStream);
		const int rounds = std::max(cfg.scrub_max_steps, cfg.scrub_min_steps);
		for (int e = 0; e < cfg.epochs; ++e) {
			for (int r = 0; r < rounds; ++r) {
				if (r < cfg.scrub_max_steps)
					st.pass(forget, cfg.batch_size, forget_rng, LossKind::kl_to_teacher, teach, cfg.lr,
					        Direction::ascent);
				if (r < cfg.scrub_min_steps)
					st.pass(retain, cfg.batch_size, retain_rng, LossKind::task_plus_kl, teach, cfg.lr,
					        Direction::descent);
			}
		}
	});
}

UnlearnOutcome run_unlearning(const LayeredModel &model, const DataView &retain, const DataView &forget,
                              const MethodConfig &cfg, Clock &clock) {
	switch (cfg.method) {
	case Method::ft:
		return finetune(model, retain, cfg, clock);
	case Method::ng:
		return neg_grad(model, forget, cfg, clock);
	case Method::ng_plus:
		return neg_grad_plus(model, retain, forget, cfg, clock);
	case Method::cf_k:
		return cf_k(model, retain, cfg, clock);
	case Method::unsir:
		return unsir(model, retain, forget, cfg, clock);
	case Method::bt:
		return bad_teaching(model, retain, forget, cfg, IncompetentTeacher::frozen_model, clock);
	case Method::bt_light:
		return bad_teaching(model, retain, forget, cfg, IncompetentTeacher::uniform, clock);
	case Method::scrub:
		return scrub(model, retain, forget, cfg, clock);
	case Method::original:
	case Method::gold:
		break;
	}
	throw ConfigError("'" + method_id(cfg.method) + "' is a baseline, not an unlearning method");
}

} // namespace unbench
