#include "ctes/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "ctes/hawkes.hpp"
#include "ctes/imtpp.hpp"
#include "ctes/io.hpp"
#include "ctes/metrics.hpp"
#include "ctes/synthetic.hpp"
#include "ctes/transfer.hpp"

namespace ctes {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
    if (!j.is_object()) throw std::runtime_error(where + ": expected an object");
    for (const auto& [key, val] : j.items())
        if (!allowed.count(key))
            throw std::runtime_error("unknown config key '" + where + "." + key + "'");
}

Dataset load_dataset_spec(const json& j, const std::string& where, std::uint64_t seed) {
    check_keys(j, where, {"path", "format", "synthetic"});
    if (j.contains("path")) {
        std::string path = j.at("path").get<std::string>();
        if (!fs::exists(path))
            throw std::runtime_error(where + ".path: file not found '" + path + "'");
        if (j.contains("format"))
            return load_dataset(path, format_from_string(j.at("format").get<std::string>()));
        return load_dataset(path);
    }
    if (!j.contains("synthetic"))
        throw std::runtime_error(where + ": needs either 'path' or 'synthetic'");
    const json& s = j.at("synthetic");
    check_keys(s, where + ".synthetic",
               {"generator", "n_seq", "seq_len", "n_marks", "mu", "sigma2", "p0", "noise",
                "mark_prefix", "seed"});
    std::string gen = s.at("generator").get<std::string>();
    int n_seq = s.value("n_seq", 50);
    int seq_len = s.value("seq_len", 50);
    int n_marks = s.value("n_marks", 4);
    std::uint64_t gseed = s.value("seed", seed);
    if (gen == "constant_lognormal")
        return gen_constant_lognormal(n_seq, seq_len, s.value("mu", 0.0),
                                      s.value("sigma2", 1.0), n_marks, gseed);
    if (gen == "mark_biased")
        return gen_mark_biased(n_seq, seq_len, s.value("p0", 0.9), n_marks, gseed);
    if (gen == "alternating")
        return gen_alternating(n_seq, seq_len, gseed, s.value("noise", 0.05));
    if (gen == "parity")
        return gen_parity_gaps(n_seq, seq_len, n_marks, gseed,
                               s.value("mark_prefix", std::string("m")));
    if (gen == "spatial") return gen_spatial(n_seq, seq_len, n_marks, gseed);
    throw std::runtime_error(where + ".synthetic.generator: unknown generator '" + gen +
                             "'");
}

ModelConfig model_config(const json& root, const Dataset& ds) {
    ModelConfig mc;
    mc.n_marks = static_cast<int>(ds.vocab.size());
    mc.has_locations = ds.has_locations;
    if (!root.contains("model")) return mc;
    const json& m = root.at("model");
    check_keys(m, "model",
               {"d_emb", "d_h", "d_in", "constant_heads", "w_mark", "w_time", "w_dist",
                "temporal_only"});
    mc.d_emb = m.value("d_emb", mc.d_emb);
    mc.d_h = m.value("d_h", mc.d_h);
    mc.d_in = m.value("d_in", mc.d_in);
    mc.constant_heads = m.value("constant_heads", false);
    mc.w_mark = m.value("w_mark", 1.0);
    mc.w_time = m.value("w_time", 1.0);
    mc.w_dist = m.value("w_dist", 1.0);
    if (m.value("temporal_only", false)) mc.w_dist = 0.0;
    return mc;
}

TrainConfig train_config(const json& root, std::uint64_t seed) {
    TrainConfig tc;
    tc.seed = seed;
    if (!root.contains("train")) return tc;
    const json& t = root.at("train");
    check_keys(t, "train",
               {"epochs", "batch_size", "lr", "beta1", "beta2", "eps", "clip"});
    tc.epochs = t.value("epochs", tc.epochs);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.lr = t.value("lr", tc.lr);
    tc.beta1 = t.value("beta1", tc.beta1);
    tc.beta2 = t.value("beta2", tc.beta2);
    tc.eps = t.value("eps", tc.eps);
    tc.clip = t.value("clip", tc.clip);
    return tc;
}

std::array<Dataset, 3> split_from_config(const json& root, const Dataset& ds,
                                         std::uint64_t seed) {
    double tr = 0.8, va = 0.1, te = 0.1;
    if (root.contains("split")) {
        const json& s = root.at("split");
        check_keys(s, "split", {"train", "val", "test"});
        tr = s.value("train", tr);
        va = s.value("val", va);
        te = s.value("test", te);
    }
    return split_dataset(ds, tr, va, te, seed);
}

void write_curves(const std::string& dir, const TrainTrace& trace) {
    std::ofstream out(dir + "/curves.csv");
    out << "epoch,split,value\n";
    char buf[32];
    for (std::size_t e = 0; e < trace.train_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", trace.train_loss[e]);
        out << (e + 1) << ",train," << buf << "\n";
        if (e < trace.val_loss.size()) {
            std::snprintf(buf, sizeof(buf), "%.17g", trace.val_loss[e]);
            out << (e + 1) << ",val," << buf << "\n";
        }
    }
}

json report_json(const std::string& task, std::uint64_t seed, const MetricsReport& rep) {
    json out;
    out["task"] = task;
    out["seed"] = seed;
    out["point_estimate"] = "median";
    out["time_mae"] = rep.time_mae;
    out["dist_mae"] = rep.dist_mae ? json(*rep.dist_mae) : json(nullptr);
    json acc;
    for (const auto& [k, v] : rep.mark_accuracy_at_k) acc[std::to_string(k)] = v;
    out["mark_accuracy_at_k"] = acc.is_null() ? json::object() : acc;
    out["nll_per_event"] = rep.nll_per_event;
    if (rep.imputation) {
        json imp;
        imp["matched_mae"] = rep.imputation->matched_mae
                                 ? json(*rep.imputation->matched_mae)
                                 : json(nullptr);
        imp["count_error"] = rep.imputation->count_error;
        out["imputation"] = imp;
    } else {
        out["imputation"] = nullptr;
    }
    out["elbo_final"] = rep.elbo_final ? json(*rep.elbo_final) : json(nullptr);
    out["forecast_mae_per_step"] = rep.forecast_mae_per_step.empty()
                                       ? json(nullptr)
                                       : json(rep.forecast_mae_per_step);
    return out;
}

void write_report(const std::string& dir, const json& rep) {
    std::ofstream out(dir + "/metrics.json");
    out << rep.dump(2) << "\n";
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    ExperimentConfig c;
    c.path = path;
    c.text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return c;
}

int run_experiment(const ExperimentConfig& cfg, const std::string& task,
                   std::optional<std::uint64_t> seed_override,
                   std::optional<std::string> out_override) {
    json root = json::parse(cfg.text);
    check_keys(root, "config",
               {"task", "seed", "out", "dataset", "split", "model", "train", "imtpp",
                "transfer", "hawkes", "forecast", "impute"});
    std::string t = task.empty() ? root.value("task", std::string()) : task;
    if (t.empty()) throw std::runtime_error("no task given (config 'task' or subcommand)");
    static const std::set<std::string> known_tasks = {
        "simulate", "simulate-hawkes", "fit",      "fit-imtpp", "fit-hawkes",
        "transfer", "impute",          "forecast", "evaluate"};
    if (!known_tasks.count(t)) throw std::runtime_error("unknown task '" + t + "'");
    std::uint64_t seed = seed_override ? *seed_override : root.value("seed", 0ULL);
    std::string out = out_override ? *out_override : root.value("out", std::string("out"));
    fs::create_directories(out);

    if (t == "simulate") {
        if (!root.contains("dataset"))
            throw std::runtime_error("simulate: config needs a 'dataset' section");
        Dataset ds = load_dataset_spec(root.at("dataset"), "dataset", seed);
        save_dataset(ds, out + "/dataset.csv", FileFormat::csv);
        MetricsReport rep;
        rep.nll_per_event = 0.0;
        json j = report_json(t, seed, rep);
        j["n_sequences"] = ds.sequences.size();
        j["n_events"] = ds.num_events();
        write_report(out, j);
        return 0;
    }

    if (t == "simulate-hawkes" || t == "fit-hawkes") {
        if (!root.contains("hawkes"))
            throw std::runtime_error(t + ": config needs a 'hawkes' section");
        const json& h = root.at("hawkes");
        check_keys(h, "hawkes",
                   {"users", "beta", "horizon", "n_seq", "mu", "A", "k", "iters", "lr",
                    "params_path", "dataset_path"});
        double beta = h.value("beta", 1.0);
        double horizon = h.value("horizon", 100.0);
        int n_seq = h.value("n_seq", 20);

        if (t == "simulate-hawkes") {
            HawkesParams p;
            p.beta = beta;
            p.mu = h.at("mu").get<std::vector<double>>();
            p.A = h.at("A").get<std::vector<std::vector<double>>>();
            p.validate();
            Dataset ds;
            for (std::size_t u = 0; u < p.mu.size(); ++u)
                ds.vocab.push_back("u" + std::to_string(u));
            RandomStream rng(seed);
            for (int s = 0; s < n_seq; ++s) {
                Sequence sq = simulate_hawkes(p, horizon, rng.next_u64(),
                                              "seq" + std::to_string(s));
                if (!sq.events.empty()) ds.sequences.push_back(std::move(sq));
            }
            save_dataset(ds, out + "/dataset.csv", FileFormat::csv);
            p.save(out + "/hawkes_true.params");
            MetricsReport rep;
            json j = report_json(t, seed, rep);
            j["n_sequences"] = ds.sequences.size();
            j["n_events"] = ds.num_events();
            write_report(out, j);
            return 0;
        }

        // fit-hawkes
        std::string dpath = h.value("dataset_path", out + "/dataset.csv");
        Dataset ds = load_dataset(dpath);
        int users = h.value("users", static_cast<int>(ds.vocab.size()));
        HawkesFitConfig fc;
        fc.iters = h.value("iters", fc.iters);
        fc.lr = h.value("lr", fc.lr);
        fc.seed = seed;
        HawkesParams fit = fit_hawkes_mle(ds.sequences, users, beta, horizon, fc);
        fit.save(out + "/hawkes_fit.params");
        MetricsReport rep;
        rep.nll_per_event =
            hawkes_nll(fit, ds.sequences, horizon) / static_cast<double>(ds.num_events());
        json j = report_json(t, seed, rep);
        if (h.contains("k")) {
            CommunityAssignment ca = assign_communities(fit.A, h.at("k").get<int>(), seed);
            j["communities"] = ca.labels;
        }
        write_report(out, j);
        return 0;
    }

    if (t == "fit" || t == "evaluate" || t == "forecast") {
        if (!root.contains("dataset"))
            throw std::runtime_error(t + ": config needs a 'dataset' section");
        Dataset full = load_dataset_spec(root.at("dataset"), "dataset", seed);
        auto [train_ds, val_ds, test_ds] = split_from_config(root, full, seed);
        ModelConfig mc = model_config(root, full);
        MtppModel model = MtppModel::make(mc, seed);
        TrainConfig tc = train_config(root, seed);
        TrainTrace trace = train(model, train_ds, &val_ds, tc);
        write_curves(out, trace);
        model.params.save(out + "/model.ckpt");
        MetricsReport rep = evaluate(model, test_ds);
        if (t == "forecast") {
            int horizon = 5;
            if (root.contains("forecast")) {
                const json& f = root.at("forecast");
                check_keys(f, "forecast", {"horizon"});
                horizon = f.value("horizon", 5);
            }
            std::vector<double> abs_sum(horizon, 0.0);
            std::vector<std::size_t> cnt(horizon, 0);
            for (const auto& seq : test_ds.sequences) {
                if (seq.events.size() < static_cast<std::size_t>(horizon) + 2) continue;
                std::size_t cut = seq.events.size() - horizon;
                Sequence prefix;
                prefix.id = seq.id;
                prefix.events.assign(seq.events.begin(), seq.events.begin() + cut);
                auto fc = model.forecast(prefix, horizon, seed, true);
                for (int s = 0; s < horizon; ++s) {
                    abs_sum[s] += std::abs(fc[s].time - seq.events[cut + s].time);
                    ++cnt[s];
                }
            }
            for (int s = 0; s < horizon; ++s)
                rep.forecast_mae_per_step.push_back(
                    cnt[s] ? abs_sum[s] / static_cast<double>(cnt[s]) : 0.0);
        }
        write_report(out, report_json(t, seed, rep));
        return 0;
    }

    if (t == "fit-imtpp" || t == "impute") {
        if (!root.contains("dataset"))
            throw std::runtime_error(t + ": config needs a 'dataset' section");
        Dataset full = load_dataset_spec(root.at("dataset"), "dataset", seed);
        double fraction = 0.3;
        int samples_per_gap = 3;
        int max_missing = 8;
        if (root.contains("imtpp")) {
            const json& im = root.at("imtpp");
            check_keys(im, "imtpp",
                       {"deletion_fraction", "samples_per_gap", "max_missing_per_gap"});
            fraction = im.value("deletion_fraction", fraction);
            samples_per_gap = im.value("samples_per_gap", samples_per_gap);
            max_missing = im.value("max_missing_per_gap", max_missing);
        }
        // synthetic MCAR deletion with retained ground truth
        Dataset observed = full;
        std::vector<std::vector<Event>> deleted(full.sequences.size());
        RandomStream drng(seed ^ 0x9e3779b97f4a7c15ULL);
        for (std::size_t i = 0; i < full.sequences.size(); ++i) {
            auto [obs, del] = delete_events(full.sequences[i], fraction, drng.next_u64());
            observed.sequences[i] = std::move(obs);
            deleted[i] = std::move(del);
        }
        auto [train_ds, val_ds, test_ds] = split_from_config(root, observed, seed);
        ModelConfig mc = model_config(root, observed);
        LogNormalParams prior = default_missing_prior(train_ds);
        ImtppModel model = ImtppModel::make(mc, prior, seed, max_missing);
        TrainConfig tc = train_config(root, seed);
        TrainTrace trace = train_imtpp(model, train_ds, &val_ds, tc);
        write_curves(out, trace);
        model.p.params.save(out + "/model_p.ckpt");
        model.q_params.save(out + "/model_q.ckpt");

        MetricsReport rep = evaluate(model.p, test_ds);
        if (!trace.train_loss.empty()) rep.elbo_final = -trace.train_loss.back();

        if (t == "impute") {
            // impute every sequence and score against the deleted ground truth
            double mae_sum = 0.0, cnt_sum = 0.0;
            std::size_t mae_n = 0, n_seqs = 0;
            Dataset imputed_out = observed;
            for (std::size_t i = 0; i < observed.sequences.size(); ++i) {
                Sequence imp = model.impute(observed.sequences[i], samples_per_gap,
                                            seed + i);
                ImputationMetrics im = evaluate_imputation(imp, deleted[i]);
                if (im.matched_mae) {
                    mae_sum += *im.matched_mae;
                    ++mae_n;
                }
                cnt_sum += im.count_error;
                ++n_seqs;
                imputed_out.sequences[i] = std::move(imp);
            }
            ImputationMetrics agg;
            if (mae_n) agg.matched_mae = mae_sum / static_cast<double>(mae_n);
            agg.count_error = n_seqs ? cnt_sum / static_cast<double>(n_seqs) : 0.0;
            rep.imputation = agg;
            save_dataset(imputed_out, out + "/imputed.csv", FileFormat::csv);
        }
        write_report(out, report_json(t, seed, rep));
        return 0;
    }

    if (t == "transfer") {
        if (!root.contains("transfer"))
            throw std::runtime_error("transfer: config needs a 'transfer' section");
        const json& tr = root.at("transfer");
        check_keys(tr, "transfer",
                   {"source", "target", "lr_mult", "freeze", "target_epochs"});
        Dataset source = load_dataset_spec(tr.at("source"), "transfer.source", seed);
        Dataset target = load_dataset_spec(tr.at("target"), "transfer.target", seed + 1);
        ModelConfig mc = model_config(root, source);
        TrainConfig tc = train_config(root, seed);
        MtppModel src_model = train_source(source, mc, tc);
        src_model.params.save(out + "/source.ckpt");

        TransferConfig xc;
        xc.lr_mult = tr.value("lr_mult", 0.1);
        if (tr.contains("freeze"))
            xc.freeze = tr.at("freeze").get<std::vector<std::string>>();
        xc.target_train = tc;
        xc.target_train.epochs = tr.value("target_epochs", tc.epochs);
        xc.reinit_seed = seed + 17;
        TrainTrace trace;
        MtppModel tuned = fine_tune(src_model, target, xc, &trace);
        write_curves(out, trace);
        tuned.params.save(out + "/model.ckpt");
        MetricsReport rep = evaluate(tuned, target);
        write_report(out, report_json(t, seed, rep));
        return 0;
    }

    throw std::runtime_error("unknown task '" + t + "'");
}

}  // namespace ctes
