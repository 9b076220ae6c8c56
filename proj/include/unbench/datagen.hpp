#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace unbench {

using SpeakerId = int;

struct Sample {
	std::vector<double> x;
	int y = 0;
	SpeakerId s = 0;

	bool operator==(const Sample &) const = default;
};

/// Synthetic speaker-clustered intent data: x = prototype[y] + leakage * offset[s] + noise.
struct GenConfig {
	std::size_t d = 32;
	std::size_t classes = 12;
	std::size_t train_speakers = 40;
	std::size_t test_speakers = 8;
	std::size_t train_samples = 5000;
	std::size_t test_samples = 1000;
	std::size_t min_samples_per_speaker = 80;
	std::size_t max_samples_per_speaker = 160;
	double prototype_scale = 0.6;
	double leakage = 0.8;
	double noise = 1.0;
	std::uint64_t seed = 7;

	/// Throws ConfigError when a field is out of range or the totals cannot be met.
	void validate() const;
	bool operator==(const GenConfig &) const = default;
};

struct DatasetBundle {
	std::vector<Sample> train;
	std::vector<Sample> test;
	/// speaker -> sample count, covering train and test speakers.
	std::map<SpeakerId, std::size_t> speakers;
	GenConfig config;
	std::uint64_t seed = 0;

	std::set<SpeakerId> train_speakers() const;
	std::set<SpeakerId> test_speakers() const;
	std::size_t dim() const {
		return config.d;
	}
	std::size_t classes() const {
		return config.classes;
	}
	/// Checks the registry, labels, finiteness and speaker disjointness.
	void validate() const;
	bool operator==(const DatasetBundle &) const = default;
};

struct ForgetRequest {
	std::set<SpeakerId> speakers;
	double fraction = 0.0;
};

struct ForgetSelection {
	std::size_t min_samples = 100;
	double lo = 0.025;
	double hi = 0.05;
	std::uint64_t seed = 0;
};

DatasetBundle generate(const GenConfig &cfg);

/// Picks eligible speakers (>= min_samples train samples) at random until the forget
/// fraction lands in [lo, hi]. Throws InfeasibleForgetRequest if no subset can.
ForgetRequest select_forget_speakers(const DatasetBundle &bundle, const ForgetSelection &sel);

struct Split {
	std::vector<Sample> retain;
	std::vector<Sample> forget;
};

Split split(const DatasetBundle &bundle, const ForgetRequest &request);

// Delimited export: <stem>.csv holds train rows then test rows; <stem>.meta.json holds
// the generation config, seed, speaker registry and split membership.
void export_dataset(const DatasetBundle &bundle, const std::string &stem);
DatasetBundle import_dataset(const std::string &stem);

} // namespace unbench
