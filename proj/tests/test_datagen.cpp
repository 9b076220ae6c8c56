#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "unbench/datagen.hpp"
#include "unbench/errors.hpp"
#include "unbench/metrics.hpp"
#include "unbench/unlearn.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

using namespace unbench;

namespace {

Sample toy(SpeakerId s, int y, double v) {
	return Sample{{v, -v}, y, s};
}

// Hand-built bundle: speaker s contributes counts[s] training samples, labels alternate.
DatasetBundle toy_bundle(const std::vector<std::size_t> &counts) {
	DatasetBundle b;
	b.config.d = 2;
	b.config.classes = 2;
	b.config.train_speakers = counts.size();
	b.config.test_speakers = 1;
	SpeakerId test_speaker = static_cast<SpeakerId>(counts.size());
	for (std::size_t s = 0; s < counts.size(); ++s) {
		for (std::size_t i = 0; i < counts[s]; ++i)
			b.train.push_back(toy(static_cast<SpeakerId>(s), static_cast<int>(i % 2), static_cast<double>(i)));
		b.speakers[static_cast<SpeakerId>(s)] = counts[s];
	}
	b.test = {toy(test_speaker, 0, 0.5), toy(test_speaker, 1, 1.5)};
	b.speakers[test_speaker] = 2;
	b.config.train_samples = b.train.size();
	b.config.test_samples = 2;
	return b;
}

GenConfig small_config(std::uint64_t seed) {
	GenConfig c;
	c.train_speakers = 12;
	c.test_speakers = 4;
	c.train_samples = 1200;
	c.test_samples = 400;
	c.seed = seed;
	return c;
}

} // namespace

TEST_CASE("generate: same seed gives identical bundles, a new seed does not") {
	GenConfig c = small_config(3);
	auto a = generate(c), b = generate(c);
	CHECK(a == b);
	c.seed = 4;
	CHECK_FALSE(generate(c) == a);
}

TEST_CASE("generate: default sizes, registry and class coverage") {
	auto b = generate(GenConfig{});
	CHECK(b.train.size() == 5000);
	CHECK(b.test.size() == 1000);
	CHECK(b.train_speakers().size() == 40);
	CHECK(b.test_speakers().size() == 8);
	std::set<int> train_classes, test_classes;
	for (const auto &s : b.train)
		train_classes.insert(s.y);
	for (const auto &s : b.test)
		test_classes.insert(s.y);
	CHECK(train_classes.size() == 12);
	CHECK(test_classes.size() == 12);
	std::map<SpeakerId, std::size_t> counts;
	for (const auto &s : b.train)
		++counts[s.s];
	for (const auto &s : b.test)
		++counts[s.s];
	CHECK(counts == b.speakers);
	CHECK_NOTHROW(b.validate());
}

TEST_CASE("generate: train and test speakers are disjoint for many seeds") {
	for (std::uint64_t seed = 0; seed < 20; ++seed) {
		auto b = generate(small_config(seed));
		auto tr = b.train_speakers(), te = b.test_speakers();
		std::vector<SpeakerId> both;
		std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
		CHECK(both.empty());
	}
}

TEST_CASE("generate: noiseless, leak-free data is separable by nearest class mean") {
	GenConfig c = small_config(9);
	c.leakage = 0.0;
	c.noise = 1e-6;
	auto b = generate(c);
	// Class means estimated from train act as the prototypes.
	std::vector<std::vector<double>> mean(c.classes, std::vector<double>(c.d, 0.0));
	std::vector<std::size_t> n(c.classes, 0);
	for (const auto &s : b.train) {
		for (std::size_t j = 0; j < c.d; ++j)
			mean[s.y][j] += s.x[j];
		++n[s.y];
	}
	for (std::size_t k = 0; k < c.classes; ++k)
		for (auto &v : mean[k])
			v /= static_cast<double>(n[k]);
	std::vector<int> preds, labels;
	for (const auto &s : b.test) {
		int best = 0;
		double best_d = 1e300;
		for (std::size_t k = 0; k < c.classes; ++k) {
			double d = 0.0;
			for (std::size_t j = 0; j < c.d; ++j)
				d += (s.x[j] - mean[k][j]) * (s.x[j] - mean[k][j]);
			if (d < best_d) {
				best_d = d;
				best = static_cast<int>(k);
			}
		}
		preds.push_back(best);
		labels.push_back(s.y);
	}
	CHECK(macro_f1(preds, labels, c.classes) == doctest::Approx(1.0));
}

TEST_CASE("generate: config errors") {
	GenConfig c;
	c.d = 1;
	CHECK_THROWS_AS(generate(c), ConfigError);
	c = GenConfig{};
	c.noise = 0.0;
	CHECK_THROWS_AS(generate(c), ConfigError);
	c = GenConfig{};
	c.leakage = -1.0;
	CHECK_THROWS_AS(generate(c), ConfigError);
	c = GenConfig{};
	c.train_speakers = 0;
	CHECK_THROWS_AS(generate(c), ConfigError);
	c = GenConfig{};
	c.train_samples = 10; // below 40 speakers * 80
	CHECK_THROWS_AS(generate(c), ConfigError);
}

TEST_CASE("select_forget_speakers: default band and eligibility") {
	auto b = generate(GenConfig{});
	std::map<SpeakerId, std::size_t> train_counts;
	for (const auto &s : b.train)
		++train_counts[s.s];
	for (std::uint64_t seed = 0; seed < 25; ++seed) {
		ForgetSelection sel;
		sel.seed = seed;
		auto r = select_forget_speakers(b, sel);
		CHECK(r.fraction >= 0.025);
		CHECK(r.fraction <= 0.05);
		CHECK_FALSE(r.speakers.empty());
		std::size_t total = 0;
		for (auto sp : r.speakers) {
			CHECK(train_counts.count(sp) == 1);
			CHECK(train_counts[sp] >= 100);
			total += train_counts[sp];
		}
		CHECK(static_cast<double>(total) / 5000.0 == doctest::Approx(r.fraction));
		CHECK(select_forget_speakers(b, sel).speakers == r.speakers);
	}
}

TEST_CASE("select_forget_speakers: nobody eligible") {
	auto b = generate(small_config(1));
	ForgetSelection sel;
	sel.min_samples = 100000;
	CHECK_THROWS_AS(select_forget_speakers(b, sel), InfeasibleForgetRequest);
}

TEST_CASE("select_forget_speakers: infeasible band reports the closest fraction") {
	auto b = toy_bundle({50, 50, 50, 50}); // every subset is a multiple of 25%
	ForgetSelection sel;
	sel.min_samples = 10;
	sel.lo = 0.30;
	sel.hi = 0.40;
	try {
		select_forget_speakers(b, sel);
		FAIL("expected InfeasibleForgetRequest");
	} catch (const InfeasibleForgetRequest &e) {
		CHECK(e.closest_fraction() == doctest::Approx(0.25));
	}
}

TEST_CASE("select_forget_speakers: single eligible speaker on a five-speaker toy") {
	// Only speaker 0 reaches min_samples; the exhaustive oracle below confirms {0} is the
	// unique feasible subset for this band.
	std::vector<std::size_t> counts{30, 29, 28, 27, 26};
	auto b = toy_bundle(counts);
	ForgetSelection sel;
	sel.min_samples = 30;
	sel.lo = 0.2;
	sel.hi = 0.25;
	const double n = 140.0;
	std::vector<std::set<SpeakerId>> feasible;
	for (unsigned mask = 1; mask < 32; ++mask) {
		std::set<SpeakerId> subset;
		std::size_t total = 0;
		bool ok = true;
		for (unsigned s = 0; s < 5; ++s)
			if (mask & (1u << s)) {
				subset.insert(static_cast<SpeakerId>(s));
				total += counts[s];
				ok = ok && counts[s] >= sel.min_samples;
			}
		double f = static_cast<double>(total) / n;
		if (ok && f >= sel.lo && f <= sel.hi)
			feasible.push_back(subset);
	}
	REQUIRE(feasible.size() == 1);
	for (std::uint64_t seed = 0; seed < 5; ++seed) {
		sel.seed = seed;
		auto r = select_forget_speakers(b, sel);
		CHECK(r.speakers == feasible.front());
		CHECK(r.fraction == doctest::Approx(30.0 / 140.0));
	}
}

TEST_CASE("split: partition edge cases and a brute-force oracle") {
	auto b = toy_bundle({5, 7, 4});
	auto none = split(b, ForgetRequest{});
	CHECK(none.retain == b.train);
	CHECK(none.forget.empty());

	auto all = split(b, ForgetRequest{{0, 1, 2}, 1.0});
	CHECK(all.retain.empty());
	CHECK(all.forget == b.train);

	auto only_b = split(b, ForgetRequest{{1}, 7.0 / 16.0});
	std::vector<Sample> want_forget, want_retain;
	for (const auto &s : b.train)
		(s.s == 1 ? want_forget : want_retain).push_back(s);
	CHECK(only_b.forget == want_forget);
	CHECK(only_b.retain == want_retain);

	CHECK_THROWS_AS(split(b, ForgetRequest{{99}, 0.0}), DataError);
}

TEST_CASE("property: split is a speaker-disjoint partition") {
	auto b = generate(GenConfig{});
	for (std::uint64_t seed = 0; seed < 10; ++seed) {
		ForgetSelection sel;
		sel.seed = seed;
		auto r = select_forget_speakers(b, sel);
		auto sp = split(b, r);
		CHECK(sp.retain.size() + sp.forget.size() == b.train.size());
		std::set<SpeakerId> rs, fs;
		for (const auto &s : sp.retain)
			rs.insert(s.s);
		for (const auto &s : sp.forget)
			fs.insert(s.s);
		CHECK(fs == r.speakers);
		for (auto s : fs)
			CHECK(rs.count(s) == 0);
	}
}

TEST_CASE("export/import round trip is lossless") {
	auto dir = std::filesystem::temp_directory_path() / "unbench_test_datagen";
	std::filesystem::create_directories(dir);
	auto stem = (dir / "bundle").string();
	auto b = generate(small_config(21));
	export_dataset(b, stem);
	CHECK(std::filesystem::exists(stem + ".csv"));
	CHECK(std::filesystem::exists(stem + ".meta.json"));
	auto back = import_dataset(stem);
	CHECK(back == b);
	CHECK_THROWS_AS(import_dataset((dir / "missing").string()), IoError);
	std::filesystem::remove_all(dir);
}

TEST_CASE("default data: an overfit model has lower train loss than test loss") {
	auto b = generate(GenConfig{});
	TrainRecipe r;
	WorkClock clock;
	auto m = train_original(r, b.dim(), b.classes(), DataView(b.train), clock).model;
	double train_loss = mean_loss(m, b.train), test_loss = mean_loss(m, b.test);
	MESSAGE("train loss " << train_loss << ", test loss " << test_loss);
	CHECK(train_loss < test_loss);
}

TEST_CASE("property: forget-set MIA does not fall as speaker leakage grows") {
	// Reduced sizes keep this quick; both settings share everything except leakage.
	auto mia_at = [](double leakage, std::uint64_t seed) {
		GenConfig c = small_config(seed);
		c.leakage = leakage;
		auto b = generate(c);
		ForgetSelection sel;
		sel.min_samples = 80;
		sel.lo = 0.1;
		sel.hi = 0.2;
		sel.seed = seed;
		auto sp = split(b, select_forget_speakers(b, sel));
		TrainRecipe r;
		r.seed = seed;
		WorkClock clock;
		auto m = train_original(r, b.dim(), b.classes(), DataView(b.train), clock).model;
		return mia_score(m, sp.forget, b.test, seed);
	};
	auto stats = [](const std::vector<double> &v) {
		double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
		double var = 0.0;
		for (double x : v)
			var += (x - mean) * (x - mean);
		return std::pair{mean, std::sqrt(var / static_cast<double>(v.size() - 1))};
	};
	std::vector<double> low, high;
	for (std::uint64_t seed = 1; seed <= 5; ++seed) {
		low.push_back(mia_at(0.2, seed));
		high.push_back(mia_at(1.6, seed));
	}
	auto [m_low, sd_low] = stats(low);
	auto [m_high, sd_high] = stats(high);
	MESSAGE("MIA leakage 0.2: " << m_low << " +- " << sd_low << ", leakage 1.6: " << m_high << " +- " << sd_high);
	CHECK(m_high >= m_low - std::max(sd_low, sd_high));
}
