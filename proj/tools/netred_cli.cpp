// Command-line front end: analyze, minreal, reduce, error, export-dot.
//
// Every run prints exactly one JSON object on stdout: a summary on success,
// {"error": {...}} on failure (exit code 1; 2 for usage errors). Artifacts
// are written only after the whole computation has succeeded.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netred/netred.hpp"

namespace fs = std::filesystem;
using netred::Matrix;
using netred::io::Json;

namespace {

struct Config {
    std::string laplacian;
    std::string edges;
    int vertices = 0;
    std::string input;
    std::string output;
    int order = 0;
    std::string clustering;
    std::string reduced_laplacian;
    std::string reduced_input;
    std::string reduced_output;
    bool force = false;
    bool skip_minreal = false;
    bool strict_reachability = false;
    std::string out;
    double tol_rank = 10.0;
    double tol_residual = 1e-8;
    double tol_cluster = 1e-8;
};

netred::PipelineOptions pipeline_options(const Config& c) {
    netred::PipelineOptions o;
    o.reduction.semistable.rank_factor = c.tol_rank;
    o.reduction.semistable.residual_tol = c.tol_residual;
    o.reduction.clusterability_tol = c.tol_cluster;
    o.reduction.reach_mode = c.strict_reachability ? netred::ReachMode::every_source : netred::ReachMode::any_source;
    o.error.residual_tol = c.tol_residual;
    o.error.semistable = o.reduction.semistable;
    o.skip_minimal_realization = c.skip_minreal;
    o.force = c.force;
    return o;
}

Json tolerances_json(const Config& c) {
    return Json{{"rank_factor", c.tol_rank},
                {"residual", c.tol_residual},
                {"clusterability", c.tol_cluster},
                {"reachability", c.strict_reachability ? "every_source" : "any_source"}};
}

Json ids(const std::vector<int>& v) {
    Json j = Json::array();
    for (int x : v) j.push_back(x + 1);
    return j;
}

Json id_lists(const std::vector<std::vector<int>>& v) {
    Json j = Json::array();
    for (const auto& x : v) j.push_back(ids(x));
    return j;
}

/// Missing or conflicting options; reported like a parse failure.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Matrix read_or_identity(const std::string& path, int n) {
    return path.empty() ? Matrix(Matrix::Identity(n, n)) : netred::io::read_matrix_market(path);
}

netred::NetworkSystem load_system(const Config& c) {
    if (c.laplacian.empty() == c.edges.empty())
        throw UsageError("give exactly one of --laplacian and --edges");
    const Matrix lap = c.laplacian.empty() ? netred::build_laplacian(netred::io::read_edge_csv(c.edges, c.vertices))
                                           : netred::io::read_laplacian(c.laplacian);
    const int n = static_cast<int>(lap.rows());
    if (n == 0) throw netred::InvalidArgument("network has no vertices");
    Matrix f = read_or_identity(c.input, n);
    Matrix h = c.output.empty() ? Matrix(Matrix::Identity(n, n)) : netred::io::read_matrix_market(c.output);
    return netred::NetworkSystem(lap, std::move(f), std::move(h));
}

fs::path out_dir(const Config& c) {
    const fs::path dir = c.out.empty() ? fs::path(".") : fs::path(c.out);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw netred::InvalidArgument("cannot write " + p.string());
    out << text;
}

Json analysis_json(const netred::Analysis& a, const Config& c) {
    Json j;
    j["n"] = a.n;
    j["connectedness"] = netred::to_string(a.connectedness);
    j["sccs"] = id_lists(a.sccs);
    j["lsccs"] = id_lists(a.lsccs);
    j["m"] = a.null_dimension;
    j["n_c"] = a.min_order;
    j["semistable"] = a.semistable;
    if (!a.semistable) j["semistable_message"] = a.semistable_message;
    j["controllable"] = a.controllable ? Json(*a.controllable) : Json(nullptr);
    j["observable"] = a.observable ? Json(*a.observable) : Json(nullptr);
    j["generalized_balanced"] = a.generalized_balanced;
    j["balancing_weights"] = std::vector<double>(a.m.data(), a.m.data() + a.m.size());
    j["input_vertices"] = ids(a.input_vertices);
    j["output_vertices"] = ids(a.output_vertices);
    j["tolerances"] = tolerances_json(c);
    return j;
}

Json minreal_json(const netred::MinimalRealization& mr, const netred::ErrorReport& err) {
    Json steps = Json::array();
    for (const auto& s : mr.log) {
        Json step{{"kind", netred::to_string(s.kind)}, {"vertices", ids(s.vertices)}};
        if (s.kind == netred::RealizationStep::Kind::merged_input ||
            s.kind == netred::RealizationStep::Kind::merged_output)
            step["beta"] = s.beta;
        steps.push_back(step);
    }
    Json j;
    j["changed"] = !mr.unchanged();
    j["message"] = mr.unchanged() ? "no changes" : std::to_string(mr.log.size()) + " step(s)";
    j["steps"] = steps;
    j["origin"] = id_lists(mr.origin);
    j["anchor"] = mr.anchor ? Json(*mr.anchor + 1) : Json(nullptr);
    j["n"] = mr.system.n();
    j["error"] = netred::io::report_to_json(err);
    return j;
}

void write_system(const fs::path& dir, const std::string& prefix, const Matrix& lap, const Matrix& f,
                  const Matrix& h) {
    netred::io::write_matrix_market((dir / (prefix + "_laplacian.mtx")).string(), lap);
    netred::io::write_matrix_market((dir / (prefix + "_input.mtx")).string(), f);
    netred::io::write_matrix_market((dir / (prefix + "_output.mtx")).string(), h);
}

std::string dot_text(const netred::DiGraph& g, const netred::Clustering* c, const std::string& name) {
    std::ostringstream os;
    netred::io::write_dot(os, g, c, name);
    return os.str();
}

Json cmd_analyze(const Config& c) {
    const auto sys = load_system(c);
    const Json j = analysis_json(netred::analyze(sys, pipeline_options(c)), c);
    if (!c.out.empty()) netred::io::write_json((out_dir(c) / "analysis.json").string(), j);
    return j;
}

Json cmd_minreal(const Config& c) {
    const auto sys = load_system(c);
    const auto opts = pipeline_options(c);
    const auto mr = netred::minimal_network_realization(sys, opts.reduction);
    const auto err = netred::h2_error_between(sys, mr.system, opts.error);
    const Json log = minreal_json(mr, err);
    const auto dir = out_dir(c);
    write_system(dir, "minreal", mr.system.laplacian(), mr.system.F(), mr.system.H());
    netred::io::write_json((dir / "minreal_log.json").string(), log);
    return Json{{"command", "minreal"},
                {"n_before", sys.n()},
                {"n_after", mr.system.n()},
                {"changed", !mr.unchanged()},
                {"h2_error", log["error"]["h2_error"]},
                {"tolerances", tolerances_json(c)}};
}

Json cmd_reduce(const Config& c) {
    const auto sys = load_system(c);
    const auto opts = pipeline_options(c);
    std::optional<netred::Clustering> user;
    int base_n = sys.n();
    if (!c.clustering.empty()) {
        // User clusterings refer to the vertices of the system as given, so
        // the minimal realization must not renumber them.
        if (!c.skip_minreal) {
            const auto mr = netred::minimal_network_realization(sys, opts.reduction);
            if (!mr.unchanged())
                throw netred::InvalidArgument("network is not minimal; reduce it with 'minreal' first or pass "
                                              "--skip-minreal");
        }
        user = netred::io::read_clustering(c.clustering, base_n);
    } else if (c.order < 1) {
        throw UsageError("--order is required (or give --clustering)");
    }
    auto run_opts = opts;
    if (user) run_opts.skip_minimal_realization = true;
    const auto res = netred::reduce(sys, c.order, run_opts, user);

    Json report = netred::io::report_to_json(res.report);
    report["tolerances"].update(tolerances_json(c));
    if (!res.reduced.proper) report["warning"] = "clustering is not proper; the approximation error is unbounded";
    if (res.direct_error) report["direct_h2_error"] = *res.direct_error;
    Json clustering = netred::io::clustering_to_json(res.clustering);
    if (res.minimal && !res.minimal->unchanged()) {
        Json original = Json::array();
        for (const auto& cell : res.clustering.cells()) {
            std::vector<int> members;
            for (int v : cell) {
                const auto& o = res.minimal->origin[static_cast<std::size_t>(v)];
                members.insert(members.end(), o.begin(), o.end());
            }
            std::sort(members.begin(), members.end());
            original.push_back(ids(members));
        }
        clustering["original_cells"] = original;
    }

    const auto dir = out_dir(c);
    write_system(dir, "reduced", res.reduced.Lhat, res.reduced.Fhat, res.reduced.Hhat);
    netred::io::write_json((dir / "clustering.json").string(), clustering);
    netred::io::write_json((dir / "error_report.json").string(), report);
    {
        std::ostringstream os;
        netred::io::write_dissimilarity_csv(os, res.dissimilarity);
        write_text(dir / "dissimilarity.csv", os.str());
    }
    write_text(dir / "original.dot", dot_text(res.base.graph(), &res.clustering, "original"));
    write_text(dir / "reduced.dot", dot_text(netred::DiGraph::from_laplacian(res.reduced.Lhat), nullptr, "reduced"));
    if (res.minimal && !res.minimal->unchanged()) {
        const auto err = netred::h2_error_between(sys, res.minimal->system, opts.error);
        netred::io::write_json((dir / "minreal_log.json").string(), minreal_json(*res.minimal, err));
    }
    return Json{{"command", "reduce"},
                {"order", res.clustering.order()},
                {"cells", clustering["cells"]},
                {"bounded", res.report.bounded},
                {"h2_error", report["h2_error"]},
                {"proper", res.reduced.proper}};
}

Json cmd_error(const Config& c) {
    const auto sys = load_system(c);
    const auto opts = pipeline_options(c);
    Json report;
    if (!c.clustering.empty()) {
        // The reduced model is the projection; the trace formula gives the
        // error and the stacked error system cross-checks it.
        const auto cl = netred::io::read_clustering(c.clustering, sys.n());
        const auto dec = netred::decompose(sys, opts.reduction.semistable);
        const auto classes = netred::clusterable_classes(sys, dec, opts.reduction);
        const auto proj = netred::project(sys, cl, classes, true);
        const netred::ErrorEvaluator ev(sys, opts.error);
        if (!ev.bounded(proj)) {
            netred::ErrorReport r;
            r.method = "thm8_formula";
            r.residuals["boundedness"] = ev.boundedness_gap(proj);
            r.tolerances["boundedness"] = opts.error.bounded_tol;
            report = netred::io::report_to_json(r);
            report["warning"] = "clustering is not proper; the approximation error is unbounded";
        } else {
            report = netred::io::report_to_json(ev.thm8(proj));
            report["direct_h2_error"] = *ev.direct(proj).h2_error;
        }
    } else {
        if (c.reduced_laplacian.empty()) throw UsageError("--reduced-laplacian is required (or give --clustering)");
        if (c.reduced_input.empty() || c.reduced_output.empty())
            throw UsageError("--reduced-input and --reduced-output are required");
        const netred::NetworkSystem red(netred::io::read_laplacian(c.reduced_laplacian),
                                        netred::io::read_matrix_market(c.reduced_input),
                                        netred::io::read_matrix_market(c.reduced_output));
        report = netred::io::report_to_json(netred::h2_error_between(sys, red, opts.error));
    }
    report["tolerances"].update(tolerances_json(c));
    if (!c.out.empty()) netred::io::write_json((out_dir(c) / "error_report.json").string(), report);
    return report;
}

Json cmd_export_dot(const Config& c) {
    const auto sys = load_system(c);
    std::optional<netred::Clustering> cl;
    if (!c.clustering.empty()) cl = netred::io::read_clustering(c.clustering, sys.n());
    const auto path = out_dir(c) / "graph.dot";
    write_text(path, dot_text(sys.graph(), cl ? &*cl : nullptr, "network"));
    return Json{{"command", "export-dot"}, {"file", path.string()}};
}

Json error_json(const std::string& kind, const std::string& message) {
    return Json{{"error", {{"kind", kind}, {"message", message}}}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustering-based reduction of semistable network systems"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Key-value configuration file; command-line flags take precedence");

    Config c;
    app.add_option("--laplacian", c.laplacian, "Laplacian in Matrix Market format");
    app.add_option("--edges", c.edges, "Edge list CSV with header src,dst,weight (1-based)");
    app.add_option("--vertices", c.vertices, "Vertex count for --edges (default: largest id)");
    app.add_option("--input", c.input, "Input matrix F (Matrix Market); identity if omitted");
    app.add_option("--output", c.output, "Output matrix H (Matrix Market); identity if omitted");
    app.add_option("--order", c.order, "Target reduced order r");
    app.add_option("--clustering", c.clustering, "Clustering JSON {\"cells\": [[...]], \"order\": r}");
    app.add_option("--reduced-laplacian", c.reduced_laplacian, "Reduced Laplacian (error)");
    app.add_option("--reduced-input", c.reduced_input, "Reduced input matrix (error)");
    app.add_option("--reduced-output", c.reduced_output, "Reduced output matrix (error)");
    app.add_flag("--force", c.force, "Accept clusterings that are not proper");
    app.add_flag("--skip-minreal", c.skip_minreal, "Do not compute a minimal realization before clustering");
    app.add_flag("--strict-reachability", c.strict_reachability,
                 "A vertex counts as reachable only if every input reaches it");
    app.add_option("--out", c.out, "Output directory");
    app.add_option("--tol-rank", c.tol_rank, "Rank threshold factor k in k*n*eps*sigma_max");
    app.add_option("--tol-residual", c.tol_residual, "Relative residual accepted for matrix equations");
    app.add_option("--tol-cluster", c.tol_cluster, "Clusterability tolerance");

    Json (*handler)(const Config&) = nullptr;
    app.add_subcommand("analyze", "Structure, semistability, controllability and minimum order")
        ->callback([&] { handler = cmd_analyze; });
    app.add_subcommand("minreal", "Minimal network realization with a log of removals and merges")
        ->callback([&] { handler = cmd_minreal; });
    app.add_subcommand("reduce", "Clustering-based reduction to --order")->callback([&] { handler = cmd_reduce; });
    app.add_subcommand("error", "H2 error between the network and a reduced model")
        ->callback([&] { handler = cmd_error; });
    app.add_subcommand("export-dot", "Write the network as a DOT graph")->callback([&] { handler = cmd_export_dot; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cout << error_json("UsageError", e.what()).dump(2) << '\n';
        return 2;
    }

    try {
        const Json result = handler(c);
        std::cout << result.dump(2) << '\n';
        return 0;
    } catch (const UsageError& e) {
        std::cout << error_json("UsageError", e.what()).dump(2) << '\n';
        return 2;
    } catch (const netred::ParseError& e) {
        Json j = error_json(e.kind(), e.what());
        j["error"]["file"] = e.file();
        j["error"]["line"] = e.line();
        std::cout << j.dump(2) << '\n';
    } catch (const netred::OrderTooSmall& e) {
        Json j = error_json(e.kind(), e.what());
        j["error"]["n_c"] = e.min_order();
        std::cout << j.dump(2) << '\n';
    } catch (const netred::Error& e) {
        std::cout << error_json(e.kind(), e.what()).dump(2) << '\n';
    } catch (const std::exception& e) {
        std::cout << error_json("InternalError", e.what()).dump(2) << '\n';
    }
    return 1;
}
