#include <doctest.h>

#include <cmath>

#include "cvfr/eval.hpp"
#include "test_helpers.hpp"

using namespace cvfr;

namespace {

Model make_model(int n, int k, std::uint64_t seed, double sigma = 0.0, int steps = 20) {
    auto [sc, attractors] = testutil::planted_model(n, k, seed);
    Model m;
    m.coupling = std::move(sc);
    m.attractors = std::move(attractors);
    m.integration.dt = 0.1;
    m.integration.steps = steps;
    m.integration.sigma = sigma;
    return m;
}

} // namespace

TEST_CASE("classification criteria") {
    const Model model = make_model(9, 3, 11);
    const AttractorSet& att = model.attractors;

    SUBCASE("exact attractor states classify to their class under both criteria") {
        for (int k = 0; k < 3; ++k) {
            CHECK(classify(att.states[static_cast<std::size_t>(k)], att, {}) == k);
            Criterion l2;
            l2.kind = Criterion::Kind::l2_threshold;
            CHECK(classify(att.states[static_cast<std::size_t>(k)], att, l2) == k);
            Criterion state_space;
            state_space.state_space = true;
            CHECK(classify(att.states[static_cast<std::size_t>(k)], att, state_space) == k);
        }
    }
    SUBCASE("zero state ties every inner product at 0 and resolves to class 0") {
        CHECK(classify(Vector(9, 0.0), att, {}) == 0);
    }
    SUBCASE("far state is rejected in L2 mode with a small threshold") {
        Criterion l2;
        l2.kind = Criterion::Kind::l2_threshold;
        l2.tau = 0.5;
        const Vector far(9, 100.0);
        CHECK(classify(far, att, l2) == kRejected);
        l2.tau_relative = false;
        l2.tau = 1e9;
        CHECK(classify(far, att, l2) != kRejected);
    }
}

TEST_CASE("accuracy") {
    const Model model = make_model(9, 3, 13);

    SUBCASE("items sitting on attractor 0 all classify to class 0: chance level on balanced labels") {
        LabeledDataset ds;
        ds.dim = 9;
        for (int label : {0, 1, 2, 0, 1, 2}) {
            ds.items.push_back(model.attractors.states[0]);
            ds.labels.push_back(label);
        }
        CHECK(accuracy(model, ds, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("deterministic model evaluated twice gives identical accuracy") {
        LabeledDataset ds = gen_letters({model.attractors.patterns[0], model.attractors.patterns[1],
                                         model.attractors.patterns[2]},
                                        10, 0.2, 5);
        const double a = accuracy(model, ds, 1);
        const double b = accuracy(model, ds, 2); // returned value must not depend on the eval seed
        CHECK(a == b);
    }
    SUBCASE("majority vote with one realization equals single-run classification") {
        Model noisy = make_model(9, 3, 13, 0.1);
        LabeledDataset ds = gen_letters({noisy.attractors.patterns[0], noisy.attractors.patterns[1],
                                         noisy.attractors.patterns[2]},
                                        4, 0.2, 7);
        const Matrix coupling = assemble(noisy.coupling);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            IntegrationConfig cfg = noisy.integration;
            cfg.seed = derive_seed(derive_seed(123, i), 0);
            const Vector fs = integrate_final(ds.items[i], coupling, noisy.coupling.hill_c, noisy.coupling.beta,
                                              noisy.attractors.states, cfg);
            correct += classify(fs, noisy.attractors, {}) == ds.labels[i];
        }
        const double batched = accuracy(noisy, ds, 123, 1);
        CHECK(batched == doctest::Approx(static_cast<double>(correct) / ds.size()).epsilon(1e-12));
    }
    SUBCASE("input validation") {
        LabeledDataset empty;
        empty.dim = 9;
        CHECK_THROWS_AS(accuracy(model, empty, 0), Error);
    }
    SUBCASE("misclassification log carries the residual to the predicted attractor") {
        LabeledDataset ds;
        ds.dim = 9;
        ds.items.push_back(model.attractors.states[0]); // converges to class 0...
        ds.labels.push_back(1);                         // ...but is labeled 1
        ds.items.push_back(model.attractors.states[2]);
        ds.labels.push_back(2); // correct
        EvalStats stats;
        const double acc = accuracy(model, ds, 0, 1, {}, &stats);
        CHECK(acc == doctest::Approx(0.5));
        REQUIRE(stats.misclassified.size() == 1);
        CHECK(stats.misclassified[0].index == 0);
        CHECK(stats.misclassified[0].label == 1);
        CHECK(stats.misclassified[0].predicted == 0);
        CHECK(stats.misclassified[0].residual < 1e-6); // wrong basin, fully converged
    }
}

TEST_CASE("robustness sweep") {
    const Model model = make_model(9, 3, 17);
    LabeledDataset ds = gen_letters({model.attractors.patterns[0], model.attractors.patterns[1],
                                     model.attractors.patterns[2]},
                                    8, 0.2, 3);
    const std::vector<double> p_grid{0.0, 0.3};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const std::vector<Model> models{model};
    const RobustnessTable table = robustness_sweep(models, ds, 'A', p_grid, seeds);
    REQUIRE(table.rows.size() == 2);

    SUBCASE("p = 0 rows equal clean accuracy") {
        const double clean = accuracy(model, ds, 42);
        CHECK(table.rows[0].intensity == 0.0);
        CHECK(table.rows[0].accuracy == doctest::Approx(clean).epsilon(1e-12));
        for (double acc : table.rows[0].per_seed) CHECK(acc == clean);
    }
    SUBCASE("rows are sorted by p and reproducible") {
        CHECK(table.rows[0].intensity <= table.rows[1].intensity);
        const RobustnessTable again = robustness_sweep(models, ds, 'A', p_grid, seeds);
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            CHECK(table.rows[r].accuracy == again.rows[r].accuracy);
            CHECK(table.rows[r].per_seed == again.rows[r].per_seed);
        }
    }
    SUBCASE("grid validation") {
        const std::vector<double> bad{0.3, 0.1};
        CHECK_THROWS_AS(robustness_sweep(models, ds, 'A', bad, seeds), Error);
        CHECK_THROWS_AS(robustness_sweep(models, ds, 'A', std::vector<double>{}, seeds), Error);
    }
    SUBCASE("CSV emission") {
        const std::string path = testutil::temp_path("robustness.csv");
        write_robustness_csv(path, table);
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "kind,p,sigma,accuracy");
        int rows = 0;
        while (std::getline(in, line)) rows += !line.empty();
        CHECK(rows == 2);
    }
}

TEST_CASE("trajectory ensembles") {
    SUBCASE("sigma = 0 gives identically zero spread") {
        const Model model = make_model(9, 2, 19, 0.0);
        const Vector item(9, 0.5);
        const EnsembleStats stats = trajectory_ensemble(model, item, 0, 10, 5);
        for (double s : stats.stddev) CHECK(s == 0.0);
    }
    SUBCASE("sigma > 0: zero spread at t = 0, positive spread later") {
        const Model model = make_model(9, 2, 19, 0.5);
        const Vector item(9, 0.5);
        const EnsembleStats stats = trajectory_ensemble(model, item, 1, 50, 5);
        REQUIRE(stats.stddev.size() == static_cast<std::size_t>(model.integration.steps) + 1);
        CHECK(stats.stddev[0] == 0.0); // exactly: identical initial condition
        double max_std = 0.0;
        for (double s : stats.stddev) max_std = std::max(max_std, s);
        CHECK(max_std > 0.0);
        CHECK(stats.times[0] == 0.0);
    }
    SUBCASE("node bounds are checked") {
        const Model model = make_model(9, 2, 19);
        CHECK_THROWS_AS(trajectory_ensemble(model, Vector(9, 0.0), 9, 3, 0), DimensionError);
    }
    SUBCASE("CSV emission") {
        const Model model = make_model(9, 2, 19, 0.2);
        const EnsembleStats stats = trajectory_ensemble(model, Vector(9, 0.5), 0, 5, 1);
        const std::string path = testutil::temp_path("ensemble.csv");
        write_ensemble_csv(path, stats);
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        CHECK(line == "t,mean,std");
    }
}
