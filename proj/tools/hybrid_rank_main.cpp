// hybrid-rank: command-line front end for the hybrid lexical + embedding
// retrieval pipeline.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hybrid_rank/config.hpp"
#include "hybrid_rank/errors.hpp"
#include "hybrid_rank/pipeline.hpp"

namespace {

using namespace hybrid_rank;

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool deterministic = false;
};

void add_common(CLI::App* sub, CommonOptions& opts) {
    sub->add_option("-c,--config", opts.config, "Run configuration (JSON)")->required();
    sub->add_option("--set", opts.overrides, "Override a config value, e.g. --set model.epochs=5");
    sub->add_option("-o,--output-dir", opts.output_dir, "Artifact directory (overrides output_dir)");
    sub->add_option("--seed", opts.seed, "Master seed (overrides seed)");
    sub->add_option("--threads", opts.threads, "Worker thread cap")->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", opts.deterministic, "Force ordered reductions");
}

RunConfig resolve_config(const CommonOptions& opts) {
    auto overrides = opts.overrides;
    if (opts.seed) {
        overrides.push_back("seed=" + std::to_string(*opts.seed));
    }
    if (opts.threads) {
        overrides.push_back("threads=" + std::to_string(*opts.threads));
    }
    if (opts.deterministic) {
        overrides.push_back("deterministic=true");
    }
    auto cfg = load_run_config(opts.config, overrides);
    if (!opts.output_dir.empty()) {
        cfg.output_dir = opts.output_dir;
    }
    return cfg;
}

void print_error(const std::string& code, const std::string& message) {
    std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid lexical + bag-of-embeddings retrieval"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string ranker_name;
    std::string scores_path;
    std::string gold_path;
    std::vector<std::string> fuse_inputs;
    std::string fuse_out;

    auto* ingest = app.add_subcommand("ingest", "Tokenize the corpus and write the split manifest");
    auto* fit = app.add_subcommand("fit", "Fit TF-IDF and BM25/LM statistics");
    auto* train = app.add_subcommand("train", "Train the bag-of-embeddings model");
    auto* tune = app.add_subcommand("tune", "Grid-search BM25 (k1, b) and Dirichlet mu on dev queries");
    auto* rank = app.add_subcommand("rank", "Score the test pool with one ranker");
    auto* fuse = app.add_subcommand("fuse", "Add score matrices");
    auto* evaluate = app.add_subcommand("evaluate", "Compute MRR and P@k");
    for (auto* sub : {ingest, fit, train, tune, rank, fuse, evaluate}) {
        add_common(sub, opts);
    }
    rank->add_option("-r,--ranker", ranker_name, "tfidf|bm25|lm|boe|fused (default: ranking.ranker)");
    fuse->add_option("-i,--inputs", fuse_inputs, "Score TSV files")->required()->expected(2, -1);
    fuse->add_option("--out", fuse_out, "Output TSV (default: <output_dir>/scores.fused-input.tsv)");
    evaluate->add_option("-s,--scores", scores_path, "Score TSV to evaluate");
    evaluate->add_option("-r,--ranker", ranker_name, "Ranker to compute and evaluate");
    evaluate->add_option("--gold", gold_path, "query_id<TAB>doc_id relevance file (default: matching ids)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const auto cfg = resolve_config(opts);
        nlohmann::json summary;
        if (*ingest) {
            summary = pipeline::cmd_ingest(cfg);
        } else if (*fit) {
            summary = pipeline::cmd_fit(cfg);
        } else if (*train) {
            summary = pipeline::cmd_train(cfg);
        } else if (*tune) {
            summary = pipeline::cmd_tune(cfg);
        } else if (*rank) {
            const Ranker r = ranker_name.empty() ? cfg.ranker : parse_ranker(ranker_name);
            summary = pipeline::cmd_rank(cfg, r);
        } else if (*fuse) {
            std::vector<std::filesystem::path> inputs(fuse_inputs.begin(), fuse_inputs.end());
            const std::filesystem::path out = fuse_out.empty() ? pipeline::Paths(cfg).scores("fused-input") : std::filesystem::path(fuse_out);
            summary = pipeline::cmd_fuse(cfg, inputs, out);
        } else if (*evaluate) {
            if (!scores_path.empty() && !ranker_name.empty()) {
                throw UsageError("pass either --scores or --ranker, not both");
            }
            std::optional<Ranker> r;
            if (!ranker_name.empty()) {
                r = parse_ranker(ranker_name);
            }
            summary = pipeline::cmd_evaluate(cfg, scores_path, r, gold_path);
        }
        std::cout << summary.dump(2) << '\n';
        return 0;
    } catch (const UsageError& e) {
        print_error(e.code(), e.what());
        return 2;
    } catch (const Error& e) {
        print_error(e.code(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal_error", e.what());
        return 1;
    }
}
