#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "mvdiag/dataset.hpp"
#include "mvdiag/errors.hpp"
#include "mvdiag/preprocess.hpp"
#include "test_support.hpp"

using namespace mvdiag;
using testsupport::TempDir;

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

// two views of dims (3, 2), four subjects
void write_small_dataset(const std::filesystem::path& dir) {
    write_file(dir / "manifest.txt",
               "view a 3 a.csv\nview b 2 b.csv\nlabels labels.csv\n");
    write_file(dir / "a.csv",
               "subject_id,f1,f2,f3\n"
               "s1,1,2,3\n"
               "s2,4,5,6\n"
               "s3,7,8,9\n"
               "s4,10,11,12\n");
    write_file(dir / "b.csv",
               "subject_id,f1,f2\n"
               "s1,0.5,1.5\n"
               "s2,2.5,3.5\n"
               "s3,4.5,5.5\n"
               "s4,6.5,7.5\n");
    write_file(dir / "labels.csv",
               "subject_id,label\ns1,0\ns2,1\ns3,0\ns4,1\n");
}

SynthConfig small_synth(std::size_t n_per_class, double separation, double noise,
                        std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_per_class = n_per_class;
    cfg.schema = {{"u", 3}, {"v", 2}};
    cfg.class_separation = separation;
    cfg.noise_per_view = {noise, noise};
    cfg.seed = seed;
    return cfg;
}

// brute-force 1-nearest-neighbour on concatenated features
int nn1_predict(const MultiViewDataset& train, const std::vector<double>& x) {
    double best = std::numeric_limits<double>::infinity();
    int label = -1;
    for (std::size_t i = 0; i < train.num_samples(); ++i) {
        const auto row = train.concat_row(i);
        double d2 = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const double d = row[j] - x[j];
            d2 += d * d;
        }
        if (d2 < best) {
            best = d2;
            label = train.labels[i];
        }
    }
    return label;
}

}  // namespace

TEST_CASE("load_dataset: happy path aligns views by subject id") {
    TempDir tmp("mvdiag_data");
    write_small_dataset(tmp.path());
    const MultiViewDataset d = load_dataset(tmp.path() / "manifest.txt");
    CHECK(d.num_samples() == 4);
    CHECK(d.num_views() == 2);
    CHECK(d.total_dim() == 5);
    CHECK(d.views[0].schema.name == "a");
    CHECK(d.views[1].values(2, 1) == doctest::Approx(5.5));
    CHECK(d.labels == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("load_dataset: invalid label value is rejected") {
    TempDir tmp("mvdiag_data");
    write_small_dataset(tmp.path());
    write_file(tmp.path() / "labels.csv", "subject_id,label\ns1,0\ns2,2\ns3,0\ns4,1\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "manifest.txt"),
                         doctest::Contains("invalid label"), DataError);
}

TEST_CASE("load_dataset: subject missing from one view is an alignment error") {
    TempDir tmp("mvdiag_data");
    write_small_dataset(tmp.path());
    write_file(tmp.path() / "b.csv",
               "subject_id,f1,f2\ns1,0.5,1.5\ns2,2.5,3.5\ns3,4.5,5.5\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "manifest.txt"),
                         doctest::Contains("s4"), DataError);
}

TEST_CASE("load_dataset: missing file, ragged row, duplicate id") {
    TempDir tmp("mvdiag_data");
    write_small_dataset(tmp.path());

    SUBCASE("missing view csv") {
        std::filesystem::remove(tmp.path() / "a.csv");
        CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "manifest.txt"),
                             doctest::Contains("missing file"), DataError);
    }
    SUBCASE("ragged row names file and line") {
        write_file(tmp.path() / "a.csv",
                   "subject_id,f1,f2,f3\ns1,1,2,3\ns2,4,5\ns3,7,8,9\ns4,10,11,12\n");
        CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "manifest.txt"),
                             doctest::Contains("a.csv:3"), DataError);
    }
    SUBCASE("duplicate id") {
        write_file(tmp.path() / "a.csv",
                   "subject_id,f1,f2,f3\ns1,1,2,3\ns1,4,5,6\ns3,7,8,9\ns4,10,11,12\n");
        CHECK_THROWS_WITH_AS(load_dataset(tmp.path() / "manifest.txt"),
                             doctest::Contains("duplicate id"), DataError);
    }
    SUBCASE("label for unknown subject") {
        write_file(tmp.path() / "labels.csv",
                   "subject_id,label\ns1,0\ns2,1\ns3,0\ns4,1\ns9,1\n");
        CHECK_THROWS_AS(load_dataset(tmp.path() / "manifest.txt"), DataError);
    }
}

TEST_CASE("save_dataset round-trips through load_dataset") {
    const MultiViewDataset d = synth_generate(small_synth(5, 2.0, 0.5, 9));
    TempDir tmp("mvdiag_save");
    const auto manifest = save_dataset(d, tmp.path() / "out");
    const MultiViewDataset back = load_dataset(manifest);
    REQUIRE(back.num_samples() == d.num_samples());
    CHECK(back.subject_ids == d.subject_ids);
    CHECK(back.labels == d.labels);
    for (std::size_t v = 0; v < d.num_views(); ++v)
        for (std::size_t i = 0; i < d.views[v].values.data.size(); ++i)
            CHECK(back.views[v].values.data[i] == d.views[v].values.data[i]);
}

TEST_CASE("standardize: hand-computed column") {
    MultiViewDataset d;
    d.subject_ids = {"s1", "s2", "s3"};
    d.labels = {0, 1, 0};
    d.views.push_back({{"x", 1}, Matrix(3, 1)});
    d.views[0].values(0, 0) = 1.0;
    d.views[0].values(1, 0) = 2.0;
    d.views[0].values(2, 0) = 3.0;

    const PreprocessStats st = fit_standardize(d);
    CHECK(st.views[0].center[0] == doctest::Approx(2.0));
    CHECK(st.views[0].scale[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));

    const MultiViewDataset out = apply_preprocess(st, d);
    CHECK(out.views[0].values(0, 0) == doctest::Approx(-1.2247448714));
    CHECK(out.views[0].values(1, 0) == doctest::Approx(0.0));
    CHECK(out.views[0].values(2, 0) == doctest::Approx(1.2247448714));
}

TEST_CASE("standardize: constant column maps to zero and is flagged") {
    MultiViewDataset d;
    d.subject_ids = {"s1", "s2", "s3"};
    d.views.push_back({{"x", 1}, Matrix(3, 1, 5.0)});
    const PreprocessStats st = fit_standardize(d);
    CHECK(st.views[0].constant[0] == 1);
    const MultiViewDataset out = apply_preprocess(st, d);
    for (std::size_t r = 0; r < 3; ++r) CHECK(out.views[0].values(r, 0) == 0.0);
}

TEST_CASE("standardize: training stats applied to an equal test row match") {
    const MultiViewDataset train = synth_generate(small_synth(10, 3.0, 1.0, 4));
    const PreprocessStats st = fit_standardize(train);
    const MultiViewDataset a = apply_preprocess(st, train);
    // a "test" dataset that repeats training row 3 must transform identically
    const MultiViewDataset test = select_rows(train, {3});
    const MultiViewDataset b = apply_preprocess(st, test);
    for (std::size_t v = 0; v < a.num_views(); ++v)
        for (std::size_t c = 0; c < a.views[v].schema.dim; ++c)
            CHECK(b.views[v].values(0, c) == a.views[v].values(3, c));
}

TEST_CASE("preprocess fit requires at least two samples") {
    MultiViewDataset d;
    d.subject_ids = {"s1"};
    d.views.push_back({{"x", 1}, Matrix(1, 1, 3.0)});
    CHECK_THROWS_AS(fit_standardize(d), std::invalid_argument);
    CHECK_THROWS_AS(fit_normalize(d), std::invalid_argument);
}

TEST_CASE("normalize: endpoints, clamping, constant column") {
    MultiViewDataset d;
    d.subject_ids = {"s1", "s2", "s3"};
    d.views.push_back({{"x", 2}, Matrix(3, 2)});
    d.views[0].values(0, 0) = 0.0;
    d.views[0].values(1, 0) = 5.0;
    d.views[0].values(2, 0) = 10.0;
    // second column constant
    for (std::size_t r = 0; r < 3; ++r) d.views[0].values(r, 1) = 7.0;

    const PreprocessStats st = fit_normalize(d);
    const MultiViewDataset out = apply_preprocess(st, d);
    CHECK(out.views[0].values(0, 0) == 0.0);
    CHECK(out.views[0].values(1, 0) == doctest::Approx(0.5));
    CHECK(out.views[0].values(2, 0) == 1.0);
    CHECK(st.views[0].constant[1] == 1);
    CHECK(out.views[0].values(1, 1) == 0.0);

    // out-of-range test value clamps to [0,1]
    MultiViewDataset test;
    test.subject_ids = {"t"};
    test.views.push_back({{"x", 2}, Matrix(1, 2)});
    test.views[0].values(0, 0) = 12.0;
    test.views[0].values(0, 1) = 7.0;
    const MultiViewDataset tout = apply_preprocess(st, test);
    CHECK(tout.views[0].values(0, 0) == 1.0);
}

TEST_CASE("preprocess invariants on random data") {
    const MultiViewDataset d = synth_generate(small_synth(40, 2.0, 1.5, 77));

    SUBCASE("standardized columns have mean 0 and population std 1") {
        const MultiViewDataset out = apply_preprocess(fit_standardize(d), d);
        for (const ViewBlock& v : out.views) {
            for (std::size_t c = 0; c < v.schema.dim; ++c) {
                double mean = 0.0;
                for (std::size_t r = 0; r < v.values.rows; ++r) mean += v.values(r, c);
                mean /= static_cast<double>(v.values.rows);
                double var = 0.0;
                for (std::size_t r = 0; r < v.values.rows; ++r) {
                    const double x = v.values(r, c) - mean;
                    var += x * x;
                }
                var /= static_cast<double>(v.values.rows);
                CHECK(std::abs(mean) <= 1e-9);
                CHECK(std::abs(1.0 - std::sqrt(var)) <= 1e-9);
            }
        }
    }
    SUBCASE("normalized columns span exactly [0,1]") {
        const MultiViewDataset out = apply_preprocess(fit_normalize(d), d);
        for (const ViewBlock& v : out.views) {
            for (std::size_t c = 0; c < v.schema.dim; ++c) {
                double lo = 1e300, hi = -1e300;
                for (std::size_t r = 0; r < v.values.rows; ++r) {
                    lo = std::min(lo, v.values(r, c));
                    hi = std::max(hi, v.values(r, c));
                }
                CHECK(lo == 0.0);
                CHECK(hi == 1.0);
            }
        }
    }
}

TEST_CASE("split: stratified sizes and determinism") {
    SynthConfig cfg = small_synth(50, 2.0, 1.0, 3);
    MultiViewDataset d = synth_generate(cfg);
    // drop 10 positives to get a 60/40-style imbalance: keep 50 neg, 40 pos
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < 90; ++i) keep.push_back(i);
    d = select_rows(d, keep);

    const SplitResult parts = split(d, 0.7, 123);
    CHECK(parts.train.num_samples() == 63);  // 35 neg + 28 pos
    CHECK(parts.test.num_samples() == 27);
    std::array<std::size_t, 2> train_counts = {0, 0};
    for (int y : parts.train.labels) train_counts[y] += 1;
    CHECK(train_counts[0] == 35);
    CHECK(train_counts[1] == 28);

    const SplitResult again = split(d, 0.7, 123);
    CHECK(again.train.subject_ids == parts.train.subject_ids);
    CHECK(again.test.subject_ids == parts.test.subject_ids);

    const SplitResult other = split(d, 0.7, 124);
    CHECK(other.train.subject_ids != parts.train.subject_ids);
}

TEST_CASE("split: 100 samples at 60/40 give 70/30 partition") {
    SynthConfig cfg = small_synth(60, 2.0, 1.0, 3);
    MultiViewDataset d = synth_generate(cfg);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < 60; ++i) keep.push_back(i);          // 60 neg
    for (std::size_t i = 60; i < 100; ++i) keep.push_back(i);        // 40 pos
    d = select_rows(d, keep);
    const SplitResult parts = split(d, 0.7, 5);
    CHECK(parts.train.num_samples() == 70);
    CHECK(parts.test.num_samples() == 30);
}

TEST_CASE("split: partition property, no id lost or duplicated") {
    const MultiViewDataset d = synth_generate(small_synth(25, 1.0, 1.0, 8));
    const SplitResult parts = split(d, 0.6, 42);
    std::multiset<std::string> ids(parts.train.subject_ids.begin(),
                                   parts.train.subject_ids.end());
    ids.insert(parts.test.subject_ids.begin(), parts.test.subject_ids.end());
    const std::multiset<std::string> all(d.subject_ids.begin(), d.subject_ids.end());
    CHECK(ids == all);
}

TEST_CASE("split: fraction emptying a stratum is rejected") {
    const MultiViewDataset d = synth_generate(small_synth(2, 1.0, 1.0, 8));
    CHECK_THROWS_AS(split(d, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(split(d, 0.95, 1), std::invalid_argument);
}

TEST_CASE("synth: deterministic, separable at high separation") {
    const SynthConfig cfg = small_synth(60, 10.0, 0.1, 11);
    const MultiViewDataset a = synth_generate(cfg);
    const MultiViewDataset b = synth_generate(cfg);
    for (std::size_t v = 0; v < a.num_views(); ++v)
        for (std::size_t i = 0; i < a.views[v].values.data.size(); ++i)
            CHECK(a.views[v].values.data[i] == b.views[v].values.data[i]);

    // 1-NN oracle trained on half the draw classifies the held-out half
    // perfectly
    const SplitResult parts = split(a, 0.5, 99);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < parts.test.num_samples(); ++i)
        if (nn1_predict(parts.train, parts.test.concat_row(i)) ==
            parts.test.labels[i])
            ++correct;
    CHECK(correct == parts.test.num_samples());
}

TEST_CASE("synth: zero separation gives class-blind features") {
    SynthConfig cfg = small_synth(1000, 0.0, 1.0, 21);
    const MultiViewDataset d = synth_generate(cfg);
    const SplitResult parts = split(d, 0.5, 7);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < parts.test.num_samples(); ++i)
        if (nn1_predict(parts.train, parts.test.concat_row(i)) ==
            parts.test.labels[i])
            ++correct;
    const double acc = static_cast<double>(correct) /
                       static_cast<double>(parts.test.num_samples());
    CHECK(acc > 0.45);
    CHECK(acc < 0.55);
}

TEST_CASE("synth: rejects invalid arguments") {
    SynthConfig cfg = small_synth(10, 1.0, 1.0, 1);
    cfg.noise_per_view = {0.5, 0.0};
    CHECK_THROWS_AS(synth_generate(cfg), std::invalid_argument);
    cfg = small_synth(0, 1.0, 1.0, 1);
    CHECK_THROWS_AS(synth_generate(cfg), std::invalid_argument);
}

TEST_CASE("concat_views: dims add up and slicing recovers each view") {
    const MultiViewDataset d = synth_generate(small_synth(6, 1.0, 1.0, 2));
    const MultiViewDataset cat = concat_views(d);
    REQUIRE(cat.num_views() == 1);
    CHECK(cat.views[0].schema.dim == 5);
    CHECK(cat.subject_ids == d.subject_ids);

    std::size_t offset = 0;
    for (const ViewBlock& v : d.views) {
        for (std::size_t r = 0; r < d.num_samples(); ++r)
            for (std::size_t c = 0; c < v.schema.dim; ++c)
                CHECK(cat.views[0].values(r, offset + c) == v.values(r, c));
        offset += v.schema.dim;
    }
}

TEST_CASE("preset schema") {
    const auto schema = preset_schema("tableII");
    REQUIRE(schema.size() == 7);
    std::size_t total = 0;
    for (const ViewSchema& v : schema) total += v.dim;
    CHECK(total == 189);
    CHECK(schema[0].name == "gray");
    CHECK(schema[1].dim == 74);
    CHECK_THROWS_AS(preset_schema("nope"), std::invalid_argument);
}
