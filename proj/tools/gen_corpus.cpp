// Writes a synthetic news-style JSONL corpus (the bundled mini-corpus is
// data/mini_corpus.jsonl = `gen-corpus --records 1000 --seed 20240601`).

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "hybrid_rank/util.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic news-style corpus"};
    hybrid_rank::synthetic::NewsSpec spec;
    std::string out;
    app.add_option("-n,--records", spec.n_records, "Number of records");
    app.add_option("--seed", spec.seed, "Generator seed");
    app.add_option("--topics", spec.n_topics, "Number of topics");
    app.add_option("--concepts", spec.concepts_per_topic, "Concepts per topic");
    app.add_option("--forms", spec.forms_per_concept, "Surface forms per concept");
    app.add_option("--query-entity-pct", spec.query_entity_pct, "Percent of queries naming the main entity");
    app.add_option("--reject-every", spec.reject_every, "Plant an unusable record every N records (0 = never)");
    app.add_option("-o,--out", out, "Output JSONL path")->required();
    CLI11_PARSE(app, argc, argv);
    try {
        hybrid_rank::write_file_atomic(out, hybrid_rank::synthetic::to_jsonl(hybrid_rank::synthetic::news_records(spec)));
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
