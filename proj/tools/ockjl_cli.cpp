// ockjl command-line front end: capture ingestion, featurization, model
// training and detection, benchmarking, and synthetic data.

#include "ockjl/ockjl.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ockjl;

std::vector<std::uint8_t> read_binary(const std::string &path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw InvalidArgument{"cannot open " + path};
    }
    return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

std::string read_text(const std::string &path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw InvalidArgument{"cannot open " + path};
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string &path, const void *data, std::size_t size) {
    std::ofstream out{path, std::ios::binary};
    if (!out) {
        throw InvalidArgument{"cannot write " + path};
    }
    out.write(static_cast<const char *>(data), static_cast<std::streamsize>(size));
    if (!out) {
        throw InvalidArgument{"write failed: " + path};
    }
}

void write_text(const std::string &path, const std::string &text) { write_file(path, text.data(), text.size()); }

FeatureTable read_features(const std::string &path) {
    auto t = parse_feature_csv(read_text(path));
    require(t.values.rows() > 0, path + ": no feature rows");
    return t;
}

// ---------------------------------------------------------------------

struct IngestArgs {
    std::string in, out;
};

void run_ingest(const IngestArgs &a) {
    const auto records = parse_pcap(read_binary(a.in));
    write_text(a.out, write_packet_csv(records));
    std::cerr << "ingest: " << records.size() << " packets\n";
}

struct FeaturizeArgs {
    std::string in, out, feature = "iat_size";
    double samp_q = 0.9;
    double truncate_q = 0.9;
    std::optional<int> label;
};

void run_featurize(const FeaturizeArgs &a) {
    const auto records = parse_packet_csv(read_text(a.in));
    auto flows = assemble_flows(records);
    require(!flows.empty(), "featurize: no flows in " + a.in);
    flows = truncate_flows(flows, a.truncate_q);
    const auto fm = extract_features(flows, parse_feature_kind(a.feature), a.samp_q);
    FeatureTable t;
    t.values = fm.values;
    t.ids.resize(static_cast<std::size_t>(fm.values.rows()));
    std::iota(t.ids.begin(), t.ids.end(), std::int64_t{0});
    if (a.label) {
        t.labels = std::vector<int>(t.ids.size(), *a.label);
    }
    write_text(a.out, write_feature_csv(t));
    std::cerr << "featurize: " << fm.values.rows() << " flows, D = " << fm.values.cols() << "\n";
}

struct TrainArgs {
    std::string features, out, kind = "kjl", k = "auto";
    Index m = 100, d = 5;
    double h_quantile = 0.25;
    double nu = 0.5;
    std::uint64_t seed = 0;
    double threshold_fpr = 0.05;
};

void run_train(const TrainArgs &a) {
    const auto table = read_features(a.features);
    const Matrix &X = table.values;
    std::vector<std::uint8_t> bytes;
    if (a.kind == "ocsvm") {
        const double h = quantile_bandwidth(X, a.h_quantile);
        const auto model = train_ocsvm(X, h, {.nu = a.nu});
        bytes = serialize(model);
        std::cerr << "train: ocsvm h = " << h << ", " << model.n_sv() << " support vectors\n";
    } else {
        DetectorConfig cfg;
        if (a.kind == "kjl") {
            cfg.kind = EmbeddingKind::KJL;
        } else if (a.kind == "nystrom") {
            cfg.kind = EmbeddingKind::NYSTROM;
        } else {
            throw InvalidArgument{"unknown model kind '" + a.kind + "'"};
        }
        cfg.m = a.m;
        cfg.d = a.d;
        cfg.bandwidth = Bandwidth::quantile(a.h_quantile);
        cfg.seed = a.seed;
        if (a.k != "auto") {
            std::int64_t k = 0;
            if (!detail::parse_integer(a.k, k) || k < 1) {
                throw InvalidArgument{"--k must be 'auto' or a positive integer"};
            }
            cfg.fixed_k = k;
        }
        TrainingInfo info;
        auto model = train_detector(X, cfg, &info);
        model.threshold = choose_threshold(model, X, a.threshold_fpr);
        bytes = serialize(model);
        std::cerr << "train: " << a.kind << " h = " << info.h << ", k = " << info.k << ", threshold = "
                  << *model.threshold << "\n";
    }
    write_file(a.out, bytes.data(), bytes.size());
}

struct DetectArgs {
    std::string model, features, out;
    std::optional<double> threshold_fpr;
};

/// Threshold precedence: an explicit --threshold-fpr recalibrates on the
/// scored rows; otherwise the stored detector threshold, or 0 for OCSVM.
void run_detect(const DetectArgs &a) {
    const auto any = deserialize_any(read_binary(a.model));
    const auto table = read_features(a.features);
    Vector scores;
    std::optional<double> threshold;
    if (const auto *dm = std::get_if<DetectorModel>(&any)) {
        scores = detect_scores(*dm, table.values);
        threshold = dm->threshold;
    } else {
        scores = ocsvm_score(std::get<OcsvmModel>(any), table.values);
        threshold = 0.0;
    }
    if (a.threshold_fpr) {
        threshold = choose_threshold(std::span<const double>{scores.data(), static_cast<std::size_t>(scores.size())},
                                     *a.threshold_fpr);
    }
    if (!threshold) {
        throw InvalidArgument{"model has no stored threshold; pass --threshold-fpr"};
    }
    std::string csv = "row_id,score,label\n";
    Index novel = 0;
    for (Index i = 0; i < scores.size(); ++i) {
        const bool flagged = classify_score(scores(i), *threshold) == Verdict::NOVEL;
        novel += flagged ? 1 : 0;
        csv += std::to_string(table.ids[static_cast<std::size_t>(i)]) + "," + format_double(scores(i)) + "," +
               (flagged ? "1" : "0") + "\n";
    }
    write_text(a.out, csv);
    std::cerr << "detect: " << novel << " of " << scores.size() << " rows flagged novel\n";
}

struct EvaluateArgs {
    std::string normal, novel, methods = "ocsvm,kjl-qs,nystrom-qs", scenario = "tuned", protocol, report,
                                 markdown;
};

ExperimentProtocol protocol_from_json(const std::string &path) {
    ExperimentProtocol p;
    if (path.empty()) {
        return p;
    }
    const auto j = nlohmann::json::parse(read_text(path));
    p.n_train = j.value("n_train", p.n_train);
    p.n_test_per_class = j.value("n_test_per_class", p.n_test_per_class);
    p.n_val = j.value("n_val", p.n_val);
    p.reps = j.value("reps", p.reps);
    p.timing_repeats = j.value("timing_repeats", p.timing_repeats);
    p.seed = j.value("seed", p.seed);
    p.m = j.value("m", p.m);
    p.d = j.value("d", p.d);
    return p;
}

void run_evaluate(const EvaluateArgs &a) {
    std::vector<Method> methods;
    for (auto name : detail::split_fields(a.methods)) {
        methods.push_back(parse_method(name));
    }
    Scenario scenario;
    if (a.scenario == "tuned") {
        scenario = Scenario::MINIMAL_TUNING;
    } else if (a.scenario == "default") {
        scenario = Scenario::NO_TUNING;
    } else {
        throw InvalidArgument{"--scenario must be 'tuned' or 'default'"};
    }
    const auto report = run_experiment(read_features(a.normal).values, read_features(a.novel).values, methods,
                                       protocol_from_json(a.protocol), scenario);
    const auto md = emit_report(report, ReportFormat::MARKDOWN);
    if (!a.report.empty()) {
        write_text(a.report, emit_report(report, ReportFormat::JSON));
    }
    if (!a.markdown.empty()) {
        write_text(a.markdown, md);
    }
    std::cout << md;
}

struct SynthArgs {
    std::string kind = "cic", out, normal_out, novel_out;
    Index n = 5000, k = 3, d = 2;
    double separation = 8.0;
    std::uint64_t seed = 0;
};

void run_synth(const SynthArgs &a) {
    FeatureTable t;
    std::vector<int> labels;
    if (a.kind == "cic") {
        auto data = synth_cluster_in_cluster(a.n, a.seed);
        t.values = std::move(data.X);
        labels = std::move(data.labels);
    } else if (a.kind == "blobs") {
        auto data = synth_blobs(a.n, a.k, a.d, a.separation, a.seed);
        t.values = std::move(data.X);
        labels = std::move(data.labels);
    } else {
        throw InvalidArgument{"--kind must be 'cic' or 'blobs'"};
    }
    t.ids.resize(labels.size());
    std::iota(t.ids.begin(), t.ids.end(), std::int64_t{0});
    t.labels = labels;
    if (!a.out.empty()) {
        write_text(a.out, write_feature_csv(t));
    }
    // per-class pools (label 0 / label 1) for `evaluate`
    auto pool = [&](int label) {
        FeatureTable p;
        std::vector<Index> rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == label) {
                rows.push_back(static_cast<Index>(i));
                p.ids.push_back(t.ids[i]);
            }
        }
        p.values = select_rows(t.values, rows);
        return p;
    };
    if (!a.normal_out.empty()) {
        write_text(a.normal_out, write_feature_csv(pool(0)));
    }
    if (!a.novel_out.empty()) {
        write_text(a.novel_out, write_feature_csv(pool(1)));
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"One-class novelty detection for network flows"};
    app.require_subcommand(1);

    IngestArgs ingest;
    auto *c_ingest = app.add_subcommand("ingest", "Convert a libpcap capture to packet CSV");
    c_ingest->add_option("--in", ingest.in, "capture file")->required();
    c_ingest->add_option("--out", ingest.out, "packet CSV")->required();

    FeaturizeArgs feat;
    auto *c_feat = app.add_subcommand("featurize", "Assemble flows and extract a feature matrix");
    c_feat->add_option("--in", feat.in, "packet CSV")->required();
    c_feat->add_option("--feature", feat.feature, "iat_size | stats_header | samp_size")
        ->check(CLI::IsMember({"iat_size", "stats_header", "samp_size"}));
    c_feat->add_option("--samp-q", feat.samp_q, "duration quantile for samp_size bins")->check(CLI::Range(0.0, 1.0));
    c_feat->add_option("--truncate-q", feat.truncate_q, "flow duration truncation quantile")
        ->check(CLI::Range(0.0, 1.0));
    c_feat->add_option("--label", feat.label, "constant label column to attach");
    c_feat->add_option("--out", feat.out, "feature CSV")->required();

    TrainArgs train;
    auto *c_train = app.add_subcommand("train", "Train a detector or OCSVM on normal features");
    c_train->add_option("--features", train.features, "feature CSV")->required();
    c_train->add_option("--kind", train.kind, "kjl | nystrom | ocsvm")
        ->check(CLI::IsMember({"kjl", "nystrom", "ocsvm"}));
    c_train->add_option("--m", train.m, "landmarks")->check(CLI::PositiveNumber);
    c_train->add_option("--d", train.d, "embedding dimension")->check(CLI::PositiveNumber);
    c_train->add_option("--h-quantile", train.h_quantile, "bandwidth quantile of pairwise distances")
        ->check(CLI::Range(0.0, 1.0));
    c_train->add_option("--k", train.k, "mixture components: auto or an integer");
    c_train->add_option("--nu", train.nu, "OCSVM nu")->check(CLI::Range(0.0, 1.0));
    c_train->add_option("--seed", train.seed, "random seed");
    c_train->add_option("--threshold-fpr", train.threshold_fpr, "training false-positive target for the stored "
                                                                "threshold")
        ->check(CLI::Range(0.0, 1.0));
    c_train->add_option("--out", train.out, "model file")->required();

    DetectArgs det;
    auto *c_det = app.add_subcommand("detect", "Score feature rows with a trained model");
    c_det->add_option("--model", det.model, "model file")->required();
    c_det->add_option("--features", det.features, "feature CSV")->required();
    c_det->add_option("--threshold-fpr", det.threshold_fpr, "recalibrate the threshold on these rows")
        ->check(CLI::Range(0.0, 1.0));
    c_det->add_option("--out", det.out, "scores CSV")->required();

    EvaluateArgs ev;
    auto *c_ev = app.add_subcommand("evaluate", "Benchmark methods on normal and novel pools");
    c_ev->add_option("--normal", ev.normal, "normal pool feature CSV")->required();
    c_ev->add_option("--novel", ev.novel, "novel pool feature CSV")->required();
    c_ev->add_option("--methods", ev.methods, "comma-separated: ocsvm,kjl,kjl-qs,nystrom,nystrom-qs");
    c_ev->add_option("--scenario", ev.scenario, "tuned | default")->check(CLI::IsMember({"tuned", "default"}));
    c_ev->add_option("--protocol", ev.protocol, "protocol JSON");
    c_ev->add_option("--report", ev.report, "JSON report output");
    c_ev->add_option("--markdown", ev.markdown, "markdown table output");

    SynthArgs syn;
    auto *c_syn = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
    c_syn->add_option("--kind", syn.kind, "cic | blobs")->check(CLI::IsMember({"cic", "blobs"}));
    c_syn->add_option("--n", syn.n, "points")->check(CLI::PositiveNumber);
    c_syn->add_option("--k", syn.k, "blobs")->check(CLI::PositiveNumber);
    c_syn->add_option("--dim", syn.d, "blob dimension")->check(CLI::PositiveNumber);
    c_syn->add_option("--separation", syn.separation, "minimum blob centre distance");
    c_syn->add_option("--seed", syn.seed, "random seed");
    c_syn->add_option("--out", syn.out, "labelled feature CSV");
    c_syn->add_option("--normal-out", syn.normal_out, "label-0 rows only");
    c_syn->add_option("--novel-out", syn.novel_out, "label-1 rows only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_ingest) {
            run_ingest(ingest);
        } else if (*c_feat) {
            run_featurize(feat);
        } else if (*c_train) {
            run_train(train);
        } else if (*c_det) {
            run_detect(det);
        } else if (*c_ev) {
            run_evaluate(ev);
        } else if (*c_syn) {
            run_synth(syn);
        }
    } catch (const ockjl::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
