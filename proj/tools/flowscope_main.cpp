#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowscope/anon.hpp"
#include "flowscope/pcap.hpp"
#include "flowscope/pipeline.hpp"

using namespace flowscope;

namespace {

void apply_common_flags(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
    cmd->add_option("--config", config_path, "configuration file (key = value)");
    cmd->add_option("--lan", cfg.lan_cidrs, "LAN prefix (repeatable)");
    cmd->add_option("--man", cfg.man_cidrs, "MAN prefix (repeatable)");
    cmd->add_option("--geo-db", cfg.geo_db_path, "continent database (cidr,continent CSV)");
    cmd->add_option("--services", cfg.services_path, "services file (name port/proto)");
    cmd->add_option("--timeout", cfg.idle_timeout_s, "flow idle timeout, seconds");
    cmd->add_option("--bin-width", cfg.bin_width_s, "duration PDF bin width, seconds");
    cmd->add_option("--other-threshold", cfg.other_threshold_percent,
                    "service share below which a row folds into Other");
    cmd->add_option("--out", cfg.out_dir, "report output directory");
    cmd->add_option("--format", [&cfg](const std::vector<std::string>& vals) {
        const std::string& v = vals.back();
        if (v == "csv") {
            cfg.format_csv = true;
            cfg.format_text = false;
        } else if (v == "text") {
            cfg.format_csv = false;
            cfg.format_text = true;
        } else if (v == "both") {
            cfg.format_csv = cfg.format_text = true;
        } else {
            return false;
        }
        return true;
    }, "output format: csv, text or both");
}

// Flags override their config-file counterparts: reload the config first,
// then re-run the parser so command-line values win.
RunConfig resolve_config(CLI::App* cmd, const std::string& config_path,
                         const RunConfig& cli_cfg) {
    if (config_path.empty()) return cli_cfg;
    RunConfig cfg = RunConfig::load(config_path);
    for (const auto* opt : cmd->get_options()) {
        if (opt->count() == 0) continue;
        const std::string& name = opt->get_name();
        if (name == "--lan") cfg.lan_cidrs = cli_cfg.lan_cidrs;
        else if (name == "--man") cfg.man_cidrs = cli_cfg.man_cidrs;
        else if (name == "--geo-db") cfg.geo_db_path = cli_cfg.geo_db_path;
        else if (name == "--services") cfg.services_path = cli_cfg.services_path;
        else if (name == "--timeout") cfg.idle_timeout_s = cli_cfg.idle_timeout_s;
        else if (name == "--bin-width") cfg.bin_width_s = cli_cfg.bin_width_s;
        else if (name == "--other-threshold")
            cfg.other_threshold_percent = cli_cfg.other_threshold_percent;
        else if (name == "--out") cfg.out_dir = cli_cfg.out_dir;
        else if (name == "--format") {
            cfg.format_csv = cli_cfg.format_csv;
            cfg.format_text = cli_cfg.format_text;
        }
    }
    return cfg;
}

Anonymizer make_anonymizer(RunConfig& cfg) {
    cfg.merge_env_key();
    if (cfg.anon_key_hex.empty())
        throw BadKeyLength(
            "no anonymization key: set anon_key_hex in the config file or the "
            "FLOWSCOPE_ANON_KEY environment variable");
    return Anonymizer(AnonKey::from_hex(cfg.anon_key_hex));
}

int run(int argc, char** argv) {
    CLI::App app{"flowscope - passive TCP trace analysis"};
    app.require_subcommand(1);

    RunConfig cli_cfg;
    std::string config_path;
    std::vector<std::string> inputs;

    auto* analyze = app.add_subcommand("analyze", "run the full pipeline on pcap traces");
    apply_common_flags(analyze, cli_cfg, config_path);
    analyze->add_option("traces", inputs, "pcap files")->required();

    auto* anonymize = app.add_subcommand("anonymize", "rewrite a trace with anonymized addresses");
    std::string anon_in, anon_out, anon_config;
    anonymize->add_option("--config", anon_config, "configuration file");
    anonymize->add_option("input", anon_in, "input pcap")->required();
    anonymize->add_option("output", anon_out, "output pcap")->required();

    auto* report = app.add_subcommand("report", "re-aggregate an exported flows.csv");
    RunConfig report_cfg;
    std::string report_config, flows_csv;
    report->add_option("--config", report_config, "configuration file");
    report->add_option("--out", report_cfg.out_dir, "report output directory");
    report->add_option("--bin-width", report_cfg.bin_width_s, "duration PDF bin width");
    report->add_option("--other-threshold", report_cfg.other_threshold_percent,
                       "service fold threshold");
    report->add_option("flows", flows_csv, "flows.csv from a previous run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (analyze->parsed()) {
            RunConfig cfg = resolve_config(analyze, config_path, cli_cfg);
            cfg.inputs = inputs;
            Anonymizer anon = make_anonymizer(cfg);
            AnalysisContext ctx{cfg.prefixes(), GeoDb{}, ServiceDb{}, cfg.flow_config()};
            if (!cfg.geo_db_path.empty()) ctx.geo = GeoDb::load(cfg.geo_db_path);
            if (!cfg.services_path.empty())
                ctx.services = ServiceDb::load(cfg.services_path);
            Aggregates agg;
            for (const auto& path : cfg.inputs) agg.merge(analyze_trace(path, ctx));
            auto emitted = emit_report(agg, cfg, &anon);
            std::fprintf(stderr, "wrote %zu files to %s\n", emitted.files.size(),
                         cfg.out_dir.c_str());
            return 0;
        }
        if (anonymize->parsed()) {
            RunConfig cfg;
            if (!anon_config.empty()) cfg = RunConfig::load(anon_config);
            Anonymizer anon = make_anonymizer(cfg);
            IngestStats stats = anonymize_trace(anon_in, anon_out, anon);
            std::fprintf(stderr, "rewrote %llu packets (%llu IPv4)\n",
                         static_cast<unsigned long long>(stats.packets_total),
                         static_cast<unsigned long long>(stats.packets_ipv4));
            return 0;
        }
        if (report->parsed()) {
            RunConfig cfg = report_config.empty() ? report_cfg
                                                  : RunConfig::load(report_config);
            if (!report_config.empty()) {
                if (report->count("--out")) cfg.out_dir = report_cfg.out_dir;
                if (report->count("--bin-width"))
                    cfg.bin_width_s = report_cfg.bin_width_s;
                if (report->count("--other-threshold"))
                    cfg.other_threshold_percent = report_cfg.other_threshold_percent;
            }
            Aggregates agg = load_flow_export(flows_csv);
            // Addresses in a flow export are already opaque; re-emit them
            // unchanged through the identity transform.
            Anonymizer identity =
                Anonymizer::with_prf([](uint32_t, int) { return false; });
            emit_report(agg, cfg, &identity);
            return 0;
        }
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const BadKeyLength& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
