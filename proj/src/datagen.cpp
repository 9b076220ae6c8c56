#include "unbench/datagen.hpp"

#include "unbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace unbench {

void GenConfig::validate() const {
	if (d < 2)
		throw ConfigError("feature dimension d must be at least 2");
	if (classes < 2)
		throw ConfigError("class count must be at least 2");
	if (train_speakers < 1 || test_speakers < 1)
		throw ConfigError("speaker counts must be at least 1");
	if (min_samples_per_speaker < 1 || min_samples_per_speaker > max_samples_per_speaker)
		throw ConfigError("samples-per-speaker range must satisfy 1 <= min <= max");
	if (!std::isfinite(leakage) || leakage < 0.0)
		throw ConfigError("leakage must be finite and non-negative");
	if (!std::isfinite(noise) || noise <= 0.0)
		throw ConfigError("noise must be finite and positive");
	if (!std::isfinite(prototype_scale) || prototype_scale <= 0.0)
		throw ConfigError("prototype_scale must be finite and positive");
	auto check_total = [&](std::size_t total, std::size_t speakers, const char *what) {
		if (total < speakers * min_samples_per_speaker || total > speakers * max_samples_per_speaker)
			throw ConfigError(std::string(what) + " sample total " + std::to_string(total) +
			                  " is unreachable with the per-speaker range");
		if (total < classes)
			throw ConfigError(std::string(what) + " sample total is smaller than the class count");
	};
	check_total(train_samples, train_speakers, "train");
	check_total(test_samples, test_speakers, "test");
}

std::set<SpeakerId> DatasetBundle::train_speakers() const {
	std::set<SpeakerId> out;
	for (const auto &s : train)
		out.insert(s.s);
	return out;
}

std::set<SpeakerId> DatasetBundle::test_speakers() const {
	std::set<SpeakerId> out;
	for (const auto &s : test)
		out.insert(s.s);
	return out;
}

void DatasetBundle::validate() const {
	std::map<SpeakerId, std::size_t> counts;
	std::vector<bool> train_classes(config.classes, false), test_classes(config.classes, false);
	auto check = [&](const Sample &s, std::vector<bool> &seen) {
		if (s.x.size() != config.d)
			throw DataError("sample feature vector has the wrong dimension");
		for (double v : s.x)
			if (!std::isfinite(v))
				throw DataError("sample has non-finite features");
		if (s.y < 0 || static_cast<std::size_t>(s.y) >= config.classes)
			throw DataError("sample label out of range");
		if (!speakers.count(s.s))
			throw DataError("speaker " + std::to_string(s.s) + " missing from the registry");
		seen[static_cast<std::size_t>(s.y)] = true;
		++counts[s.s];
	};
	for (const auto &s : train)
		check(s, train_classes);
	for (const auto &s : test)
		check(s, test_classes);
	if (counts != speakers)
		throw DataError("speaker registry counts disagree with the samples");
	auto tr = train_speakers();
	for (auto sp : test_speakers())
		if (tr.count(sp))
			throw DataError("speaker " + std::to_string(sp) + " appears in both train and test");
	if (!std::all_of(train_classes.begin(), train_classes.end(), [](bool b) { return b; }) ||
	    !std::all_of(test_classes.begin(), test_classes.end(), [](bool b) { return b; }))
		throw DataError("every class must occur in both train and test");
}

namespace {

// Per-speaker counts in [lo, hi] that sum exactly to total.
std::vector<std::size_t> draw_counts(std::size_t speakers, std::size_t total, std::size_t lo, std::size_t hi,
                                     std::mt19937_64 &rng) {
	std::uniform_int_distribution<std::size_t> dist(lo, hi);
	std::vector<std::size_t> counts(speakers);
	for (auto &c : counts)
		c = dist(rng);
	std::size_t sum = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
	std::uniform_int_distribution<std::size_t> pick(0, speakers - 1);
	while (sum != total) {
		auto &c = counts[pick(rng)];
		if (sum < total && c < hi) {
			++c;
			++sum;
		} else if (sum > total && c > lo) {
			--c;
			--sum;
		}
	}
	return counts;
}

// Labels uniform at random, then patched so every class occurs at least once.
std::vector<int> draw_labels(std::size_t n, std::size_t classes, std::mt19937_64 &rng) {
	std::uniform_int_distribution<int> dist(0, static_cast<int>(classes) - 1);
	std::vector<int> labels(n);
	std::vector<std::size_t> freq(classes, 0);
	for (auto &y : labels) {
		y = dist(rng);
		++freq[static_cast<std::size_t>(y)];
	}
	std::uniform_int_distribution<std::size_t> pick(0, n - 1);
	for (std::size_t c = 0; c < classes; ++c) {
		while (freq[c] == 0) {
			auto i = pick(rng);
			auto old = static_cast<std::size_t>(labels[i]);
			if (freq[old] > 1) {
				--freq[old];
				labels[i] = static_cast<int>(c);
				++freq[c];
			}
		}
	}
	return labels;
}

} // namespace

DatasetBundle generate(const GenConfig &cfg) {
	cfg.validate();
	std::mt19937_64 rng(cfg.seed);
	std::normal_distribution<double> gauss(0.0, 1.0);

	std::vector<std::vector<double>> prototypes(cfg.classes, std::vector<double>(cfg.d));
	for (auto &p : prototypes)
		for (auto &v : p)
			v = cfg.prototype_scale * gauss(rng);

	const std::size_t total_speakers = cfg.train_speakers + cfg.test_speakers;
	std::vector<std::vector<double>> offsets(total_speakers, std::vector<double>(cfg.d));
	for (auto &o : offsets)
		for (auto &v : o)
			v = gauss(rng);

	auto train_counts =
	    draw_counts(cfg.train_speakers, cfg.train_samples, cfg.min_samples_per_speaker, cfg.max_samples_per_speaker, rng);
	auto test_counts =
	    draw_counts(cfg.test_speakers, cfg.test_samples, cfg.min_samples_per_speaker, cfg.max_samples_per_speaker, rng);

	DatasetBundle b;
	b.config = cfg;
	b.seed = cfg.seed;

	auto fill = [&](std::vector<Sample> &out, const std::vector<std::size_t> &counts, SpeakerId first_id,
	                std::size_t total) {
		auto labels = draw_labels(total, cfg.classes, rng);
		out.reserve(total);
		std::size_t k = 0;
		for (std::size_t i = 0; i < counts.size(); ++i) {
			SpeakerId sp = first_id + static_cast<SpeakerId>(i);
			const auto &off = offsets[static_cast<std::size_t>(sp)];
			for (std::size_t n = 0; n < counts[i]; ++n, ++k) {
				Sample s;
				s.y = labels[k];
				s.s = sp;
				s.x.resize(cfg.d);
				const auto &mu = prototypes[static_cast<std::size_t>(s.y)];
				for (std::size_t j = 0; j < cfg.d; ++j)
					s.x[j] = mu[j] + cfg.leakage * off[j] + cfg.noise * gauss(rng);
				out.push_back(std::move(s));
			}
			b.speakers[sp] = counts[i];
		}
	};
	fill(b.train, train_counts, 0, cfg.train_samples);
	fill(b.test, test_counts, static_cast<SpeakerId>(cfg.train_speakers), cfg.test_samples);
	return b;
}

ForgetRequest select_forget_speakers(const DatasetBundle &bundle, const ForgetSelection &sel) {
	if (!(sel.lo >= 0.0 && sel.lo <= sel.hi && sel.hi <= 1.0))
		throw ConfigError("forget fraction band must satisfy 0 <= lo <= hi <= 1");
	const std::size_t n = bundle.train.size();
	if (n == 0)
		throw DataError("bundle has no training samples");

	std::map<SpeakerId, std::size_t> train_counts;
	for (const auto &s : bundle.train)
		++train_counts[s.s];
	std::vector<std::pair<SpeakerId, std::size_t>> eligible;
	for (auto [sp, c] : train_counts)
		if (c >= sel.min_samples)
			eligible.emplace_back(sp, c);
	if (eligible.empty())
		throw InfeasibleForgetRequest("no speaker has at least " + std::to_string(sel.min_samples) +
		                                  " training samples",
		                              0.0);

	const auto lo_count = static_cast<std::size_t>(std::ceil(sel.lo * static_cast<double>(n) - 1e-9));
	const auto hi_count = static_cast<std::size_t>(std::floor(sel.hi * static_cast<double>(n) + 1e-9));
	auto make = [&](std::set<SpeakerId> speakers, std::size_t count) {
		return ForgetRequest{std::move(speakers), static_cast<double>(count) / static_cast<double>(n)};
	};

	std::mt19937_64 rng(sel.seed);
	// Randomized accumulation: add speakers in shuffled order, skipping any that overshoot.
	for (int attempt = 0; attempt < 64; ++attempt) {
		auto order = eligible;
		std::shuffle(order.begin(), order.end(), rng);
		std::set<SpeakerId> chosen;
		std::size_t count = 0;
		for (auto [sp, c] : order) {
			if (count >= lo_count)
				break;
			if (count + c > hi_count)
				continue;
			chosen.insert(sp);
			count += c;
		}
		if (count >= lo_count && count <= hi_count && !chosen.empty())
			return make(std::move(chosen), count);
	}

	// Exhaustive subset-sum over sample counts, in a seeded order.
	auto order = eligible;
	std::shuffle(order.begin(), order.end(), rng);
	std::vector<int> via(n + 1, -1); // via[sum] = index of the speaker that first reached sum
	std::vector<bool> reach(n + 1, false);
	reach[0] = true;
	for (std::size_t i = 0; i < order.size(); ++i) {
		std::size_t c = order[i].second;
		for (std::size_t s = n; s >= c; --s) {
			if (!reach[s] && reach[s - c]) {
				reach[s] = true;
				via[s] = static_cast<int>(i);
			}
			if (s == c)
				break;
		}
	}
	for (std::size_t target = std::max<std::size_t>(lo_count, 1); target <= hi_count && target <= n; ++target) {
		if (!reach[target])
			continue;
		std::set<SpeakerId> chosen;
		std::size_t s = target;
		while (s > 0) {
			auto i = static_cast<std::size_t>(via[s]);
			chosen.insert(order[i].first);
			s -= order[i].second;
		}
		return make(std::move(chosen), target);
	}

	double best = 0.0, best_dist = 2.0;
	for (std::size_t s = 1; s <= n; ++s) {
		if (!reach[s])
			continue;
		double f = static_cast<double>(s) / static_cast<double>(n);
		double dist = f < sel.lo ? sel.lo - f : f - sel.hi;
		if (dist < best_dist) {
			best_dist = dist;
			best = f;
		}
	}
	throw InfeasibleForgetRequest("no subset of eligible speakers yields a forget fraction in [" +
	                                  std::to_string(sel.lo) + ", " + std::to_string(sel.hi) +
	                                  "]; closest achievable is " + std::to_string(best),
	                              best);
}

Split split(const DatasetBundle &bundle, const ForgetRequest &request) {
	auto known = bundle.train_speakers();
	for (auto sp : request.speakers)
		if (!known.count(sp))
			throw DataError("forget request references speaker " + std::to_string(sp) +
			                " which has no training samples");
	Split out;
	for (const auto &s : bundle.train) {
		if (request.speakers.count(s.s))
			out.forget.push_back(s);
		else
			out.retain.push_back(s);
	}
	return out;
}

} // namespace unbench
