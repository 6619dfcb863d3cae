#pragma once

// Hand-built baseline + population models whose four classifiers key on
// four different features, so a test can force any vote pattern through
// the real run_checkup path:
//
//   f1 (first_saccade_latency): OC-SVM flag. Single SV at the origin with
//      gamma 0.1 and rho 0.5, so d(x) = exp(-0.1*|x|^2) - 0.5. The flag
//      moves the point 5 units out (d ~ -0.42); without it |x|^2 stays
//      below 0.3 (d ~ +0.47). The other flags perturb |x|^2 by at most
//      0.25, far inside either margin.
//   f2 (hit_rate): LOF flag. Training points form two tight lines
//      (spacing 0.01) at f1 = 0 and f1 = 5, one for each OC-SVM flag
//      value, so the query is always next to a line unless the LOF flag
//      displaces it 0.41 along f2 (~40 spacings, LOF >> 5).
//   f3 (pupil_amp): forest flag. One manual tree splits f3 at 0.0005;
//      the flagged side is a size-1 leaf (score ~0.93), the other a
//      size-255 leaf (score ~0.47); threshold 0.7 sits between.
//   f4 (pupil_latency): GBT flag. One manual tree splits f4 at 0.0005
//      with leaf weights -100/+100, i.e. p = sigmoid(-+10).
//
// Stats are mean 0 / sd 1, so run_checkup's z-scoring is the identity and
// the crafted coordinates reach the models unchanged.

#include <cstddef>

#include "vigil/ensemble.hpp"

namespace vote_rig {

inline vigil::features::FeatureVector flag_vector(bool v_ocsvm, bool v_lof, bool v_iforest,
                                                  bool v_gbt) {
    vigil::features::FeatureVector fv{};
    fv.first_saccade_latency = v_ocsvm ? 5.0 : 0.0;
    fv.hit_rate = v_lof ? 0.5 : 0.005;
    fv.pupil_amp = v_iforest ? 0.001 : 0.0;
    fv.pupil_latency = v_gbt ? 0.001 : 0.0;
    return fv;
}

inline vigil::ensemble::DriverBaseline make_baseline() {
    using namespace vigil;
    ensemble::DriverBaseline b;
    b.subject_id = "RIG";
    for (size_t i = 0; i < features::kFeatureCount; ++i) {
        b.stats.mean[i] = 0.0;
        b.stats.sd[i] = 1.0;
    }
    b.stats.n_checkups = 10;

    b.ocsvm.sv = {std::vector<double>(features::kFeatureCount, 0.0)};
    b.ocsvm.alpha = {1.0};
    b.ocsvm.sv_index = {0};
    b.ocsvm.rho = 0.5;
    b.ocsvm.gamma = 0.1;
    b.ocsvm.nu = 0.5;
    b.ocsvm.n_train = 1;

    learners::Matrix cluster;
    for (int line = 0; line < 2; ++line)
        for (int i = 0; i < 10; ++i) {
            std::vector<double> p(features::kFeatureCount, 0.0);
            p[0] = line == 0 ? 0.0 : 5.0;
            p[1] = 0.01 * i;
            cluster.push_back(std::move(p));
        }
    b.lof = learners::train_lof(cluster, 2, 0.1);
    b.lof.lof_threshold = 5.0;

    learners::IsoForestModel::Tree tree;
    tree.nodes.resize(3);
    tree.nodes[0].feature = 2;
    tree.nodes[0].split = 0.0005;
    tree.nodes[0].left = 1;
    tree.nodes[0].right = 2;
    tree.nodes[0].size = 256;
    tree.nodes[1].size = 255; // leaf
    tree.nodes[2].size = 1;   // leaf
    b.iforest.trees = {tree};
    b.iforest.psi = 256;
    b.iforest.n_trees = 1;
    b.iforest.score_threshold = 0.7;

    b.norm_ocsvm = {0.0, 1.0};
    b.norm_iforest = {0.0, 1.0};
    b.norm_lof = {0.0, 1.0};
    b.score_threshold = 0.5;
    return b;
}

inline vigil::learners::GbtModel make_population() {
    using namespace vigil;
    learners::GbtModel m;
    learners::GbtModel::Tree tree;
    tree.nodes.resize(3);
    tree.nodes[0].feature = 3;
    tree.nodes[0].split = 0.0005;
    tree.nodes[0].left = 1;
    tree.nodes[0].right = 2;
    tree.nodes[1].weight = -100.0; // leaf
    tree.nodes[2].weight = 100.0;  // leaf
    m.trees = {tree};
    m.n_features = static_cast<int>(features::kFeatureCount);
    return m;
}

} // namespace vote_rig
