#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "helpers.hpp"
#include "malmem/error.hpp"
#include "malmem/evalkit.hpp"
#include "malmem/synthgen.hpp"

using namespace malmem;

namespace {

CvInput blobs_input(std::uint64_t seed, std::size_t n = 300, std::size_t d = 6,
                    int classes = 3, double sep = 4.0, std::size_t informative = 3) {
    SynthSpec spec;
    spec.n_samples = n;
    spec.n_features = d;
    spec.n_informative = informative;
    spec.n_classes = classes;
    spec.class_sep = sep;
    spec.seed = seed;
    const auto blobs = make_blobs(spec);
    CvInput input;
    input.X = blobs.X;
    input.y = blobs.y;
    input.n_classes = classes;
    for (int c = 0; c < classes; ++c) input.class_names.push_back("c" + std::to_string(c));
    for (std::size_t j = 0; j < d; ++j) input.feature_names.push_back("f" + std::to_string(j));
    input.task_name = "synth";
    input.dataset_hash = 0xabcd;
    return input;
}

}  // namespace

TEST_CASE("stratified folds deal each class round-robin") {
    SUBCASE("exact divisibility: every fold gets one of each class") {
        std::vector<int> y = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
        const auto plan = stratified_folds(y, 2, 5, 9);
        std::map<int, std::map<int, int>> fold_class_counts;
        for (std::size_t i = 0; i < y.size(); ++i)
            ++fold_class_counts[plan.assignments[i]][y[i]];
        for (int f = 0; f < 5; ++f) {
            CHECK(fold_class_counts[f][0] == 1);
            CHECK(fold_class_counts[f][1] == 1);
        }
    }
    SUBCASE("7/5 split over 5 folds") {
        std::vector<int> y = {0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
        const auto plan = stratified_folds(y, 2, 5, 3);
        std::vector<int> class0(5, 0), class1(5, 0);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == 0) ++class0[static_cast<std::size_t>(plan.assignments[i])];
            else ++class1[static_cast<std::size_t>(plan.assignments[i])];
        }
        std::multiset<int> sizes0(class0.begin(), class0.end());
        CHECK(sizes0 == std::multiset<int>{1, 1, 1, 2, 2});
        CHECK(class1 == std::vector<int>{1, 1, 1, 1, 1});
    }
    SUBCASE("k=1 is rejected") {
        std::vector<int> y = {0, 1};
        CHECK_THROWS_AS(stratified_folds(y, 2, 1, 0), ConfigError);
    }
    SUBCASE("class smaller than k is rejected") {
        std::vector<int> y = {0, 0, 0, 0, 0, 1, 1};
        CHECK_THROWS_WITH_AS(stratified_folds(y, 2, 3, 0), doctest::Contains("fewer than k"),
                             DataError);
    }
}

TEST_CASE("fold plans partition rows and stratify within one") {
    const auto input = blobs_input(1, 331, 4, 3, 3.0);
    const auto plan = stratified_folds(input.y, 3, 5, 12345);

    // partition: every row assigned to exactly one fold
    for (int a : plan.assignments) CHECK((a >= 0 && a < 5));

    // stratification: per class, fold sizes differ by at most one
    for (int c = 0; c < 3; ++c) {
        std::vector<int> sizes(5, 0);
        for (std::size_t i = 0; i < input.y.size(); ++i)
            if (input.y[i] == c) ++sizes[static_cast<std::size_t>(plan.assignments[i])];
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*hi - *lo <= 1);
    }
}

TEST_CASE("macro f1 hand arithmetic") {
    CHECK(macro_f1({0, 1, 2, 0}, {0, 1, 2, 0}, 3) == doctest::Approx(1.0));
    // class0: P=1, R=1/2, F1=2/3; class1: P=2/3, R=1, F1=4/5; macro=11/15
    CHECK(macro_f1({0, 0, 1, 1}, {0, 1, 1, 1}, 2) ==
          doctest::Approx(11.0 / 15.0).epsilon(1e-12));
    // constant predictions on balanced truth: (0 + 2/3)/2 = 1/3
    CHECK(macro_f1({0, 0, 1, 1}, {1, 1, 1, 1}, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK_THROWS_AS(macro_f1({0}, {0, 1}, 2), Error);
}

TEST_CASE("macro f1 counts absent classes as zero") {
    // three declared classes, class 2 never appears and is never predicted:
    // contributes 0 to the mean
    const double f1 = macro_f1({0, 1, 0, 1}, {0, 1, 0, 1}, 3);
    CHECK(f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("confusion matrix") {
    SUBCASE("perfect diagonal") {
        const auto cm = confusion({0, 1, 2}, {0, 1, 2}, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(cm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                      (i == j ? 1 : 0));
    }
    SUBCASE("direct count") {
        const auto cm = confusion({0, 0, 1, 1}, {0, 1, 1, 1}, 2);
        CHECK(cm == ConfusionMatrix{{1, 1}, {0, 2}});
        CHECK(accuracy_from_confusion(cm) == doctest::Approx(0.75));
    }
    SUBCASE("empty vectors give a zero matrix") {
        const auto cm = confusion({}, {}, 2);
        CHECK(cm == ConfusionMatrix{{0, 0}, {0, 0}});
    }
}

TEST_CASE("cross_validate with no selection equals fraction 1.0 with a method") {
    const auto input = blobs_input(2);
    const auto spec = ClassifierSpec::defaults(Algorithm::lda, 5);
    SelectionSettings none;
    SelectionSettings full_mi;
    full_mi.method = ScoreMethod::mutual_info;
    full_mi.fraction = 1.0;

    const auto a = cross_validate(input, spec, none, SelectionMode::per_fold, 5, 3);
    const auto b = cross_validate(input, spec, full_mi, SelectionMode::per_fold, 5, 3);
    REQUIRE(a.folds.size() == b.folds.size());
    for (std::size_t f = 0; f < a.folds.size(); ++f) {
        CHECK(a.folds[f].macro_f1 == b.folds[f].macro_f1);
        CHECK(a.folds[f].accuracy == b.folds[f].accuracy);
        CHECK(a.folds[f].confusion == b.folds[f].confusion);
    }
}

TEST_CASE("report invariants hold on a real run") {
    const auto input = blobs_input(3);
    const auto spec = ClassifierSpec::defaults(Algorithm::random_forest, 5);
    SelectionSettings sel;
    sel.method = ScoreMethod::mutual_info;
    sel.fraction = 0.5;
    const auto report = cross_validate(input, spec, sel, SelectionMode::per_fold, 5, 7);

    REQUIRE(report.folds.size() == 5);
    double f1_sum = 0.0, acc_sum = 0.0;
    std::size_t row_total = 0;
    for (const auto& fold : report.folds) {
        // accuracy = trace/fold size, exactly
        CHECK(fold.accuracy == accuracy_from_confusion(fold.confusion));
        CHECK(fold.macro_f1 == macro_f1_from_confusion(fold.confusion));
        long long fold_total = 0;
        for (const auto& row : fold.confusion)
            for (long long v : row) fold_total += v;
        CHECK(static_cast<std::size_t>(fold_total) == fold.test_rows);
        // row sums = per-class fold counts (recovered from the fold plan)
        const auto fold_plan = stratified_folds(input.y, 3, 5, 7);
        for (int c = 0; c < 3; ++c) {
            long long row_sum = 0;
            for (long long v : fold.confusion[static_cast<std::size_t>(c)]) row_sum += v;
            long long expected = 0;
            for (std::size_t i = 0; i < input.y.size(); ++i)
                if (input.y[i] == c && fold_plan.assignments[i] == fold.fold) ++expected;
            CHECK(row_sum == expected);
        }
        CHECK(fold.train_rows + fold.test_rows == input.y.size());
        CHECK(fold.selected_indices.size() == 3);  // half of 6
        CHECK(std::is_sorted(fold.selected_indices.begin(), fold.selected_indices.end()));
        row_total += fold.test_rows;
        f1_sum += fold.macro_f1;
        acc_sum += fold.accuracy;
    }
    CHECK(row_total == input.y.size());
    CHECK(report.macro_f1_mean == doctest::Approx(f1_sum / 5.0).epsilon(1e-15));
    CHECK(report.accuracy_mean == doctest::Approx(acc_sum / 5.0).epsilon(1e-15));
    CHECK(report.macro_f1_mean >= 0.0);
    CHECK(report.macro_f1_mean <= 1.0);

    // pooled confusion row sums = per-class row counts
    long long pooled_total = 0;
    for (const auto& row : report.pooled_confusion)
        for (long long v : row) pooled_total += v;
    CHECK(static_cast<std::size_t>(pooled_total) == input.y.size());
}

TEST_CASE("per-fold selection ignores test rows") {
    auto input = blobs_input(4, 250, 8, 2, 3.0, 4);
    const auto spec = ClassifierSpec::defaults(Algorithm::lda, 1);
    SelectionSettings sel;
    sel.method = ScoreMethod::anova_f;
    sel.fraction = 0.25;

    const auto base = cross_validate(input, spec, sel, SelectionMode::per_fold, 5, 11);

    // find the fold holding row 0, then corrupt that row's features
    const auto plan = stratified_folds(input.y, 2, 5, 11);
    const int fold_of_row0 = plan.assignments[0];
    for (std::size_t j = 0; j < input.X.cols(); ++j) input.X(0, j) = input.X(0, j) * 1e3 + 1e4;

    const auto mutated = cross_validate(input, spec, sel, SelectionMode::per_fold, 5, 11);
    CHECK(base.folds[static_cast<std::size_t>(fold_of_row0)].selected_indices ==
          mutated.folds[static_cast<std::size_t>(fold_of_row0)].selected_indices);
}

TEST_CASE("global mode reuses one selection across folds") {
    const auto input = blobs_input(5, 200, 6, 2, 4.0, 2);
    const auto spec = ClassifierSpec::defaults(Algorithm::knn, 1);
    SelectionSettings sel;
    sel.method = ScoreMethod::mutual_info;
    sel.fraction = 0.5;
    const auto report = cross_validate(input, spec, sel, SelectionMode::global, 5, 2);
    for (const auto& fold : report.folds)
        CHECK(fold.selected_indices == report.folds[0].selected_indices);
}

TEST_CASE("identical runs serialize byte-identically") {
    const auto input = blobs_input(6, 200, 5, 2, 3.0, 2);
    const auto spec = ClassifierSpec::defaults(Algorithm::random_forest, 9);
    SelectionSettings sel;
    sel.method = ScoreMethod::mutual_info;
    sel.fraction = 0.5;
    const auto a = cross_validate(input, spec, sel, SelectionMode::per_fold, 5, 21);
    const auto b = cross_validate(input, spec, sel, SelectionMode::per_fold, 5, 21);
    CHECK(a.canonical_json() == b.canonical_json());
    CHECK(a.report_hash() == b.report_hash());
}

TEST_CASE("report json round-trips the fields rendering needs") {
    const auto input = blobs_input(7, 150, 4, 2, 4.0, 2);
    const auto spec = ClassifierSpec::defaults(Algorithm::adaboost, 2);
    SelectionSettings sel;
    sel.method = ScoreMethod::chi_square;
    sel.fraction = 0.5;
    sel.min_shift = true;
    const auto report = cross_validate(input, spec, sel, SelectionMode::per_fold, 5, 4);

    const auto parsed = EvaluationReport::from_json(report.to_json());
    CHECK(parsed.task_name == report.task_name);
    CHECK(parsed.k == report.k);
    CHECK(parsed.macro_f1_mean == report.macro_f1_mean);
    CHECK(parsed.accuracy_std == report.accuracy_std);
    CHECK(parsed.pooled_confusion == report.pooled_confusion);
    CHECK(parsed.class_names == report.class_names);
    CHECK(parsed.folds.size() == report.folds.size());
    CHECK(parsed.folds[2].selected_indices == report.folds[2].selected_indices);
    CHECK(parsed.selection.method == report.selection.method);
    CHECK(parsed.selection.min_shift == true);
    CHECK(parsed.mode == report.mode);
}

TEST_CASE("selection settings labels") {
    SelectionSettings sel;
    CHECK(sel.label() == "none100");
    sel.method = ScoreMethod::mutual_info;
    sel.fraction = 0.5;
    CHECK(sel.label() == "mi50");
    sel.method = ScoreMethod::chi_square;
    sel.fraction = 0.25;
    CHECK(sel.label() == "chi225");
    sel.method = ScoreMethod::anova_f;
    CHECK(sel.label() == "anova25");
}
