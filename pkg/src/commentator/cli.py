"""Operator command line: serve, import, export, report, user add.

import/export/report operate on the store directly, so the server need
not be running; data goes to stdout, diagnostics to stderr.  Exit codes:
0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import getpass
import json
import logging
import sys
from dataclasses import replace
from importlib import resources

from commentator import __version__, analytics, server
from commentator.config import ConfigError, ensure_data_dir, load_config
from commentator.domain import TASKS
from commentator.preannotation import EmptyLexiconError, LexiconFormatError
from commentator.storage import MalformedCsvError, Store, StoreError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

DEMO_ADMIN_USERNAME = "admin"
DEMO_ADMIN_PASSWORD = "commentator-demo"


class CliParser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> CliParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="config file (default: <db-dir>/config)")
    common.add_argument("--db-dir", metavar="PATH", help="data directory")

    parser = CliParser(prog="commentator",
                       description="Annotation platform for code-mixed text.")
    parser.add_argument("--version", action="version", version=f"commentator {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    p_serve = subs.add_parser("serve", parents=[common], help="run the API server")
    p_serve.add_argument("--port", type=int, metavar="N")
    p_serve.add_argument("--static-dir", metavar="PATH",
                         help="serve a built web UI from this directory")
    p_serve.add_argument("--demo", action="store_true",
                         help="bootstrap an admin account and the sample Hinglish corpus")

    p_import = subs.add_parser("import", parents=[common], help="import a sentence CSV")
    p_import.add_argument("csv", metavar="CSV", help="path to the corpus CSV file")

    p_export = subs.add_parser("export", parents=[common], help="export annotations as CSV")
    p_export.add_argument("task", choices=TASKS)
    p_export.add_argument("--min-cmi", type=float, metavar="X")
    p_export.add_argument("--max-cmi", type=float, metavar="X")
    p_export.add_argument("--min-kappa", type=float, metavar="X")
    p_export.add_argument("--annotators", metavar="A,B", help="comma-separated ids or usernames")
    p_export.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")

    p_report = subs.add_parser("report", parents=[common], help="print corpus analytics JSON")
    p_report.add_argument("task", choices=TASKS)

    p_user = subs.add_parser("user", parents=[common], help="account management")
    user_subs = p_user.add_subparsers(dest="user_command", required=True,
                                      parser_class=CliParser)
    p_user_add = user_subs.add_parser("add", parents=[common], help="create an account")
    p_user_add.add_argument("name", metavar="NAME")
    p_user_add.add_argument("--role", choices=("annotator", "admin"), default="annotator")
    p_user_add.add_argument("--password", metavar="PW",
                            help="password (prompted when omitted)")
    return parser


def _load_config(args):
    config = load_config(db_dir=args.db_dir, config_path=args.config)
    if getattr(args, "port", None):
        config = replace(config, port=args.port)
    if getattr(args, "static_dir", None):
        config = replace(config, static_dir=args.static_dir)
    return config


def _bootstrap_demo(app: server.App):
    store = app.store
    try:
        store.create_account(DEMO_ADMIN_USERNAME, DEMO_ADMIN_PASSWORD, role="admin")
        print(f"demo admin account ready: {DEMO_ADMIN_USERNAME} / {DEMO_ADMIN_PASSWORD}",
              file=sys.stderr)
    except StoreError:
        pass  # already bootstrapped
    if store.sentence_count() == 0:
        demo = resources.files("commentator").joinpath("data", "demo_sentences.csv")
        with demo.open(encoding="utf-8") as stream:
            report = store.import_sentences(stream, app.engine, app.rec_config)
        print(f"demo corpus imported: {report.inserted} sentences", file=sys.stderr)


def cmd_serve(args) -> int:
    config = _load_config(args)
    ensure_data_dir(config)
    app = server.App(config)
    try:
        if args.demo:
            _bootstrap_demo(app)
        print(f"listening on port {config.port} (data: {config.db_dir})", file=sys.stderr)
        server.serve_forever(app)
    except KeyboardInterrupt:
        pass
    finally:
        app.store.close()
    return EXIT_OK


def cmd_import(args) -> int:
    config = _load_config(args)
    ensure_data_dir(config)
    with Store(config, owner=True) as store:
        engine = config.load_engine()
        try:
            with open(args.csv, encoding="utf-8", newline="") as stream:
                report = store.import_sentences(stream, engine)
        except MalformedCsvError as exc:
            print(json.dumps(exc.report.as_dict(), indent=2))
            raise
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def cmd_export(args) -> int:
    config = _load_config(args)
    with Store(config) as store:
        query = {
            "min_cmi": args.min_cmi,
            "max_cmi": args.max_cmi,
            "min_kappa": args.min_kappa,
            "annotators": args.annotators,
        }
        query = {k: v for k, v in query.items() if v is not None}
        filters = server.build_filters(store, args.task,
                                       {k: str(v) for k, v in query.items()})
        text = store.export_csv(filters)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    config = _load_config(args)
    with Store(config) as store:
        counts, corpus_size = store.progress(args.task)
        document = analytics.build_corpus_analytics(
            args.task,
            store.latest_annotations(args.task),
            store.latest_annotations("lid"),
            counts,
            corpus_size,
        )
    print(json.dumps(document.as_dict(), indent=2))
    return EXIT_OK


def cmd_user_add(args) -> int:
    config = _load_config(args)
    ensure_data_dir(config)
    password = args.password
    if password is None:
        password = getpass.getpass("password: ")
        if getpass.getpass("repeat password: ") != password:
            print("passwords do not match", file=sys.stderr)
            return EXIT_RUNTIME
    with Store(config, owner=True) as store:
        annotator_id = store.create_account(args.name, password, role=args.role)
    print(annotator_id)
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "import":
            return cmd_import(args)
        if args.command == "export":
            return cmd_export(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "user":
            return cmd_user_add(args)
    except (StoreError, ConfigError, LexiconFormatError, EmptyLexiconError,
            OSError, ValueError) as exc:
        print(f"commentator: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
