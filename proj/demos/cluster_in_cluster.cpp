// Trains OCSVM and the two embedded-GMM detectors on the ring of a
// cluster-in-cluster dataset and reports how well each separates the
// inner cluster, along with scoring time and model size.

#include "ockjl/ockjl.hpp"

#include <chrono>
#include <cstdio>

int main() {
    using namespace ockjl;
    const auto data = synth_cluster_in_cluster(6000, 7);

    std::vector<Index> normal_rows, novel_rows;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        (data.labels[i] == 0 ? normal_rows : novel_rows).push_back(static_cast<Index>(i));
    }
    const Matrix normal = select_rows(data.X, normal_rows);
    const Matrix novel = select_rows(data.X, novel_rows);
    const Matrix train = normal.topRows(2500);
    const Matrix test_normal = normal.bottomRows(500);
    const Matrix test_novel = novel.topRows(500);
    const double h = quantile_bandwidth(train, 0.25);

    std::printf("train %lld normals, h = %.4f\n\n", static_cast<long long>(train.rows()), h);
    std::printf("%-12s %8s %14s %12s\n", "method", "AUC", "score ms/100", "bytes");
    for (auto method : {Method::OCSVM, Method::KJL_QS, Method::NYSTROM_QS}) {
        const auto model = train_method(default_config(method), train, h, 11);
        const auto t0 = std::chrono::steady_clock::now();
        const Vector sn = score_model(model, test_normal);
        const Vector sv = score_model(model, test_novel);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%-12s %8.4f %14.3f %12zu\n", std::string{method_name(method)}.c_str(), auc(sn, sv),
                    ms / 10.0, serialize_model(model).size());
    }
    return 0;
}
