"""
Command-line interface.

Results are tab-separated tables on stdout, diagnostics go to stderr. Exit
status is 0 on success, 2 on usage errors (bad arguments, bad configuration,
missing seed) and 1 on data errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from datetime import date
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple

from . import coldstart, context, sequencer, store, tsv, walk
from .builder import build_taste_graph
from .config import Settings, resolve_seed
from .errors import ColdUser, ConfigError, TasteGraphError
from .graph import VertexId, VertexType, user as user_vertex
from .metrics import compute_indicators

logger = logging.getLogger("tastewalk")


class UsageError(Exception):
    pass


def _items(value: str) -> List[VertexId]:
    return [tsv.parse_vertex(tok) for tok in value.split(",") if tok.strip()]


def _today(value: Optional[str]) -> date:
    try:
        return date.fromisoformat(value) if value else date.today()
    except ValueError:
        raise UsageError(f"bad date {value!r}, expected YYYY-MM-DD") from None


def _write_ranking(out: TextIO, ranking: Iterable[Tuple[VertexId, float]]):
    for v, score in ranking:
        out.write(f"{tsv.format_vertex(v)}\t{score:.6g}\n")


def _load(args) -> store.Snapshot:
    return store.load_snapshot(args.snapshot)


def _known(snapshot: store.Snapshot, u: VertexId):
    return set(walk.preference_vector(snapshot.graph, snapshot.balancing, u))


def _profile_for(args, u: str) -> Optional[coldstart.DemographyProfile]:
    if not getattr(args, "profiles", None):
        return None
    profiles = tsv.load_profiles(args.profiles)
    users = tsv.load_demography(args.demography) if getattr(args, "demography", None) else {}
    return coldstart.resolve_profile(profiles, users.get(u, coldstart.GLOBAL_SEGMENT))


def cmd_build(args, settings: Settings, out: TextIO) -> int:
    log = tsv.load_playback_log(args.log)
    catalog = tsv.load_catalog(args.catalog, args.ratings)
    playlists = tsv.load_playlists(args.playlists) if args.playlists else {}
    today = _today(args.today)
    builder_cfg = settings.builder
    if args.progress:
        builder_cfg = dataclasses.replace(builder_cfg, progress=True)
    graph = build_taste_graph(log, catalog, playlists, today, builder_cfg)
    previous = 0
    if os.path.exists(args.out):
        try:
            previous = store.load_snapshot(args.out).snapshot_id
        except TasteGraphError:
            logger.warning("existing snapshot %s is unreadable, numbering restarts", args.out)
    snapshot = store.Snapshot(graph, settings.balancing, catalog.ratings(today),
                              previous + 1, store.utc_timestamp())
    store.save_snapshot(snapshot, args.out)
    out.write(f"snapshot\t{snapshot.snapshot_id}\nvertices\t{len(graph)}\n"
              f"rows\t{graph.num_rows}\nedges\t{graph.num_edges}\n")
    return 0


def cmd_recommend(args, settings: Settings, out: TextIO) -> int:
    snapshot = _load(args)
    params = _walk_params(args, settings)
    u = user_vertex(args.user)
    if u in snapshot.graph and snapshot.graph.has_out_edges(u):
        ranking = walk.recommend(snapshot.graph, snapshot.balancing, u, params,
                                 known=_known(snapshot, u))
    else:
        profile = _profile_for(args, args.user)
        if profile is None:
            raise ColdUser(f"user {args.user} has no preferences and no demography profile was given")
        logger.info("cold user %s served from profile %s", args.user, profile.segment)
        ranking = coldstart.cold_start_recommend(snapshot.graph, snapshot.balancing, {}, profile,
                                                 params, settings.coldstart)
    _write_ranking(out, ranking)
    return 0


def _walk_params(args, settings: Settings) -> walk.WalkParams:
    if getattr(args, "top", None):
        return dataclasses.replace(settings.walk, top_n=args.top)
    return settings.walk


def cmd_personalize(args, settings: Settings, out: TextIO) -> int:
    snapshot = _load(args)
    items = _items(args.items)
    if not items:
        raise UsageError("--items is empty")
    target = {v: 1.0 for v in items}
    if args.weighted:
        target = {v: snapshot.ratings.get(v.key, 0.0) for v in items}
    ranked = walk.personalize(snapshot.graph, snapshot.balancing, {user_vertex(args.user): 1.0},
                              target, settings.personalize)
    _write_ranking(out, ranked[:args.top] if args.top else ranked)
    return 0


def cmd_extend(args, settings: Settings, out: TextIO) -> int:
    snapshot = _load(args)
    prefs = walk.preference_vector(snapshot.graph, snapshot.balancing, user_vertex(args.user)) \
        if args.user else {}
    ranking = walk.extend_list(snapshot.graph, snapshot.balancing, _items(args.items), prefs,
                               _walk_params(args, settings), settings.personalize, args.min_seed)
    _write_ranking(out, ranking)
    return 0


def cmd_radio(args, settings: Settings, out: TextIO) -> int:
    seed = resolve_seed(args.seed)
    if seed is None:
        raise UsageError("radio needs --seed or TASTE_SEED")
    snapshot = _load(args)
    prefs = walk.preference_vector(snapshot.graph, snapshot.balancing, user_vertex(args.user))
    prefs = {v: w for v, w in prefs.items() if v.vtype is VertexType.TRACK}
    if args.expand:
        prefs.update({v: s for v, s in walk.recommend(
            snapshot.graph, snapshot.balancing, user_vertex(args.user),
            _walk_params(args, settings)) if v not in prefs})
    result = sequencer.generate_sequence(prefs, args.length, settings.rejection, seed,
                                         snapshot.graph, snapshot.balancing)
    for position, v in enumerate(result.items, start=1):
        out.write(f"{position}\t{tsv.format_vertex(v)}\n")
    if not result.complete:
        logger.warning("sequence is partial: %d of %d items", len(result.items), args.length)
    return 0


def cmd_contexts(args, settings: Settings, out: TextIO) -> int:
    snapshot = _load(args)
    u = user_vertex(args.user)
    prefs = walk.preference_vector(snapshot.graph, snapshot.balancing, u) if u in snapshot.graph else {}
    sets = context.generate_context_sets(snapshot.graph, snapshot.balancing, prefs, settings.cluster,
                                         profile=_profile_for(args, args.user))
    for cs in sets:
        members = sorted(cs.members, key=lambda v: (v.key, v.vtype.value))
        out.write(f"{cs.label}\t{','.join(tsv.format_vertex(v) for v in members)}\n")
    return 0


def cmd_filter(args, settings: Settings, out: TextIO) -> int:
    snapshot = _load(args)
    graph, bal = snapshot.graph, snapshot.balancing
    ctx = _items(args.context)
    if not ctx:
        raise UsageError("--context is empty")
    u = user_vertex(args.user)
    params = _walk_params(args, settings)
    mode = context.FilterMode(args.mode) if args.mode else settings.filter.mode
    known = _known(snapshot, u)
    if mode is context.FilterMode.PRE:
        prefs = context.prefilter_preferences(graph, bal, ctx, walk.preference_vector(graph, bal, u),
                                              settings.filter)
        if not prefs:
            raise TasteGraphError("no preference of the user matches the context")
        ranking = walk.recommend_from_seed(graph, bal, prefs, params, known=known)
    else:
        ranking = walk.recommend(graph, bal, u, params, known=known)
        ranking = context.postfilter_recommendations(graph, bal, ctx, ranking, settings.filter)
    _write_ranking(out, ranking)
    return 0


def cmd_coldstart_profiles(args, settings: Settings, out: TextIO) -> int:
    log = tsv.load_playback_log(args.log)
    users = tsv.load_demography(args.demography)
    min_support = args.min_support or settings.coldstart.min_support
    profiles = coldstart.build_demography_profiles(log, users, min_support)
    tsv.write_profiles(args.out, profiles)
    for p in profiles:
        out.write(f"{p.segment.age_band}\t{p.segment.sex}\t{p.segment.region}\t{p.support}\t{len(p.prefs)}\n")
    return 0


def cmd_boost(args, settings: Settings, out: TextIO) -> int:
    snapshot = _load(args)
    catalog = tsv.load_catalog(args.catalog, args.ratings)
    log = tsv.load_playback_log(args.log) if args.log else []
    playlists = tsv.load_playlists(args.playlists) if args.playlists else {}
    stats = coldstart.interested_users(log, playlists)
    result = coldstart.boost_new_items(snapshot.graph, catalog, settings.novelty, _today(args.today),
                                       stats, snapshot.ratings)
    boosted = store.Snapshot(result.graph, snapshot.balancing, result.ratings,
                             snapshot.snapshot_id + 1, store.utc_timestamp())
    store.save_snapshot(boosted, args.out)
    for v in result.boosted:
        out.write(f"{tsv.format_vertex(v)}\t{result.ratings.get(v.key, 0.0):.6g}\n")
    if result.overflow:
        logger.warning("some boosts were scaled down to fit their artist rows")
    return 0


def cmd_metrics(args, settings: Settings, out: TextIO) -> int:
    report = compute_indicators(tsv.load_tagged_events(args.log))
    for name in ("playbacks_main_vs_mymusic", "likes_main_vs_mymusic", "playbacks_per_click"):
        value = getattr(report, name)
        out.write(f"{name}\t{'undefined' if value is None else format(value, '.6g')}\n")
    return 0


def cmd_mainpage(args, settings: Settings, out: TextIO) -> int:
    page = settings.mainpage
    noise = page.noise_sigma if args.noise is None else args.noise
    seed = resolve_seed(args.seed)
    if noise > 0 and seed is None:
        raise UsageError("a noisy main page needs --seed or TASTE_SEED")
    snapshot = _load(args)
    ranking = walk.main_page(snapshot.graph, snapshot.balancing, user_vertex(args.user),
                             snapshot.ratings, args.pool or page.pool, args.top or page.top,
                             settings.personalize, noise, seed)
    _write_ranking(out, ranking)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tastewalk", description="Graph-based music recommendations")
    parser.add_argument("--config", help="settings file (default: $TASTE_CONFIG)")
    parser.add_argument("--seed", type=int, help="random seed (default: $TASTE_SEED)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_text, snapshot=True):
        p = sub.add_parser(name, help=help_text)
        if snapshot:
            p.add_argument("--snapshot", required=True, help="snapshot file")
        p.set_defaults(func=func)
        return p

    p = command("build", cmd_build, "build a snapshot from input files", snapshot=False)
    p.add_argument("--log", required=True, help="playback log: user, track, timestamp")
    p.add_argument("--catalog", required=True, help="catalog: track, artist, added date")
    p.add_argument("--ratings", help="ratings: track, date, rating")
    p.add_argument("--playlists", help="playlists: user, track")
    p.add_argument("--today", help="reference date YYYY-MM-DD")
    p.add_argument("--out", required=True, help="snapshot file to write")
    p.add_argument("--progress", action="store_true", help="show progress bars")

    p = command("recommend", cmd_recommend, "top tracks for a user")
    p.add_argument("--user", required=True)
    p.add_argument("--top", type=int)
    p.add_argument("--profiles", help="demography profiles for cold users")
    p.add_argument("--demography", help="demography: user, age, sex, region")

    p = command("personalize", cmd_personalize, "rank a list of items for a user")
    p.add_argument("--user", required=True)
    p.add_argument("--items", required=True, help="comma-separated items (type:key or track key)")
    p.add_argument("--weighted", action="store_true", help="weight items by their rating")
    p.add_argument("--top", type=int)

    p = command("extend", cmd_extend, "extend a list of tracks")
    p.add_argument("--items", required=True)
    p.add_argument("--user", help="user whose preferences enrich the list")
    p.add_argument("--min-seed", type=int, default=5)
    p.add_argument("--top", type=int)

    p = command("radio", cmd_radio, "generate a radio sequence")
    p.add_argument("--user", required=True)
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--expand", action="store_true", help="add recommended tracks to the candidates")
    p.add_argument("--top", type=int)

    p = command("contexts", cmd_contexts, "context sets of a user")
    p.add_argument("--user", required=True)
    p.add_argument("--profiles")
    p.add_argument("--demography")

    p = command("filter", cmd_filter, "context-filtered recommendations")
    p.add_argument("--user", required=True)
    p.add_argument("--context", required=True, help="comma-separated context items")
    p.add_argument("--mode", choices=[m.value for m in context.FilterMode])
    p.add_argument("--top", type=int)

    p = command("coldstart-profiles", cmd_coldstart_profiles, "build demography profiles", snapshot=False)
    p.add_argument("--log", required=True)
    p.add_argument("--demography", required=True)
    p.add_argument("--min-support", type=int)
    p.add_argument("--out", required=True)

    p = command("boost", cmd_boost, "boost novel tracks")
    p.add_argument("--catalog", required=True)
    p.add_argument("--ratings")
    p.add_argument("--log")
    p.add_argument("--playlists")
    p.add_argument("--today")
    p.add_argument("--out", required=True)

    p = command("metrics", cmd_metrics, "main page indicators", snapshot=False)
    p.add_argument("--log", required=True, help="tagged events: source, kind, user, track")

    p = command("mainpage", cmd_mainpage, "personal main page")
    p.add_argument("--user", required=True)
    p.add_argument("--pool", type=int, help="best rated tracks to choose from (default: mainpage.pool)")
    p.add_argument("--top", type=int, help="items on the page (default: mainpage.top)")
    p.add_argument("--noise", type=float, help="Gaussian noise level (default: mainpage.noise_sigma)")
    return parser


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        settings = Settings.from_env(args.config)
        if args.seed is None:
            args.seed = resolve_seed(None)
        return args.func(args, settings, out)
    except (UsageError, ConfigError) as e:
        print(f"tastewalk {args.command}: {e}", file=sys.stderr)
        return 2
    except (TasteGraphError, OSError) as e:
        print(f"tastewalk {args.command}: {e}", file=sys.stderr)
        return 1
