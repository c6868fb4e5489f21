"""Deterministic mock providers and synthetic workspace builders.

Everything here is seeded: two builds from the same seed are identical,
which is what makes full-pipeline byte-reproducibility testable.
"""
from __future__ import annotations

import base64
import hashlib
import json
import random
import re
from pathlib import Path

from .canonicalize import LabeledInterval
from .errors import ProviderError, ValidationError
from .providers import HashEmbeddingProvider

_TINY_PNG = base64.b64decode(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR42mP8z8BQDwAEhQGAhKmMIQAAAABJRU5ErkJggg=="
)

BIRYANI_TYPES = (
    "ambur", "bombay", "dindigul", "donne", "hyderabadi", "kashmiri",
    "kolkata", "awadhi", "malabar", "mughlai", "sindhi", "thalassery",
)

INGREDIENTS = (
    "basmati rice", "chicken", "onions", "tomatoes", "yogurt", "mint leaves",
    "coriander leaves", "ghee", "saffron milk", "green chilies",
    "ginger garlic paste", "garam masala", "turmeric", "potatoes",
    "lemon juice", "fried onions",
)
UTENSILS = (
    "large cooking pot", "pressure cooker", "wooden spoon", "metal cup",
    "clay pot", "frying pan", "knife", "mixing bowl", "ladle", "plate",
)
VERBS = (
    "adding", "stirring", "frying", "pouring", "marinating", "chopping",
    "washing", "soaking", "layering", "garnishing",
)

RECIPE_STEPS = (
    ("s1", "Washing and soaking rice", "Washing and soaking basmati rice in water", "Pre-prep"),
    ("s2", "Chopping vegetables", "Chopping onions tomatoes and green chilies", "Pre-prep"),
    ("s3", "Marinating the meat", "Marinating chicken with yogurt and ginger garlic paste", "Marination"),
    ("s4", "Frying the masala", "Frying onions and garam masala in ghee", "Making-Masala"),
    ("s5", "Cooking the rice", "Cooking basmati rice with turmeric and whole spices", "Cooking-Rice"),
    ("s6", "Layering rice and meat", "Layering chicken and rice with mint leaves and saffron milk", "Layering"),
    ("s7", "Dum cooking", "Sealing the pot and dum cooking on a low flame", "Dum-Cooking"),
    ("s8", "Garnishing and serving", "Garnishing with fried onions and coriander leaves before serving", "Serving"),
    ("s9", "Intro and outro", "Greetings channel promotion and closing remarks", "Misc"),
)
CHAPTER_ORDER = (
    "Pre-prep", "Marination", "Making-Masala", "Cooking-Rice",
    "Layering", "Dum-Cooking", "Serving", "Misc",
)


def _digest(seed: int, *parts: str) -> int:
    raw = ":".join([str(seed), *parts])
    return int.from_bytes(hashlib.sha256(raw.encode("utf-8")).digest()[:8], "big")


class PipelineMockChat:
    """Prompt-aware chat mock producing valid, seeded responses."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def chat_complete(self, prompt: str) -> str:
        if not prompt:
            raise ValidationError("prompt must be nonempty")
        h = _digest(self.seed, "chat", prompt)
        if "The action class is:" in prompt:
            return self._proposal(prompt, h)
        if "Should these actions be split" in prompt:
            return json.dumps({"should_split": False})
        if prompt.startswith("Video segment description:"):
            return self._easy_answers(prompt, h)
        if "Generate a detailed, step-by-step" in prompt:
            return f"A complete walkthrough of the preparation, combining every stage in order. [sum-{h % 10**8:08d}]"
        if "comprehensive, visually and verbally rich summary" in prompt:
            return f"A narrated walkthrough mixing visuals and spoken tips across all stages. [mm-{h % 10**8:08d}]"
        if "Video description:" in prompt:
            return self._qa_block(h, 3 + h % 2, "the video")
        if "Video summaries:" in prompt:
            return self._qa_block(h, 2 + h % 2, "the compared videos")
        raise ProviderError(f"mock chat has no rule for prompt: {prompt[:60]!r}")

    def _proposal(self, prompt: str, h: int) -> str:
        m = re.search(r'The action class is: "(.*)"', prompt)
        action = m.group(1) if m else "the action"
        variations = [
            f"more vigorous {action}",
            f"longer duration of {action}",
            f"different utensil used for {action}",
        ][: 2 + h % 2]
        sub_actions = [
            f"{action}: setup",
            f"{action}: main motion",
            f"{action}: finishing",
            f"{action}: cleanup",
        ][: 2 + (h >> 8) % 3]
        mapping = {
            v: [sub_actions[(h >> (4 * i)) % len(sub_actions)]] for i, v in enumerate(variations)
        }
        return json.dumps(
            {"variations": variations, "sub_actions": sub_actions, "mapping": mapping}
        )

    def _easy_answers(self, prompt: str, h: int) -> str:
        def pull(label: str) -> str:
            m = re.search(rf"{label}: ([^\n.]*)", prompt)
            return m.group(1).strip() if m else f"not visible [{h % 1000:03d}]"

        return (
            f"1. {pull('Visible ingredients')}\n"
            f"2. {pull('Utensils in use')}\n"
            f"3. {pull('Actions performed')}\n"
        )

    def _qa_block(self, h: int, count: int, subject: str) -> str:
        questions = [
            "What are the primary ingredients used in this recipe?",
            "In what order are the ingredients added during cooking?",
            "What type of pan or vessel is used to cook this dish?",
            "What is used to garnish the dish before serving?",
            "Which recipe takes the longest time to prepare?",
        ]
        pairs = []
        for i in range(count):
            key = (h >> (3 * i)) % len(questions)
            pairs.append(
                {
                    "Q": questions[key],
                    "A": f"For {subject}, {INGREDIENTS[(h >> i) % len(INGREDIENTS)]} stands out "
                    f"with {UTENSILS[(h >> (i + 2)) % len(UTENSILS)]} in view [{(h >> i) % 10**6:06d}]",
                }
            )
        return json.dumps({"Summary": f"Summary [{h % 10**8:08d}]", "QA_pairs": pairs})


class PipelineMockVision:
    """Prompt-aware vision mock; outcome frequencies mimic real runs."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def vision_analyze(self, frames, prompt: str) -> str:
        if not frames:
            raise ValidationError("vision call requires at least one frame")
        h = _digest(self.seed, "vision", prompt, str(len(frames)))
        if "The action to verify is:" in prompt:
            return "yes" if h % 100 < 78 else "no"
        if "which video shows more of this difference" in prompt:
            roll = h % 100
            if roll < 8:
                answer = "a"
            elif roll < 16:
                answer = "b"
            elif roll < 95:
                answer = "c"
            else:
                answer = "d"
            visible = answer in ("a", "b") and (h >> 8) % 10 < 9
            return json.dumps(
                {
                    "answer": answer,
                    "confidence": 1 + (h >> 16) % 5,
                    "difference_visible": visible,
                    "explanation": f"Mock observation [{h % 10**6:06d}]",
                }
            )
        if "description of a cooking video segment" in prompt:
            return f"A cook works through one stage of the dish. [cap-{h % 10**8:08d}]"
        raise ProviderError(f"mock vision has no rule for prompt: {prompt[:60]!r}")


def make_mock_providers(config: dict):
    embedding = HashEmbeddingProvider(dimension=config.get("embedding_dim", 64))
    seed = config.get("seed", 0)
    return embedding, PipelineMockChat(seed), PipelineMockVision(seed)


# ---------------------------------------------------------------------------
# Mock workspace
# ---------------------------------------------------------------------------


def _segment_actions(rng: random.Random) -> list[str]:
    actions = []
    for _ in range(rng.randint(2, 3)):
        verb = rng.choice(VERBS)
        noun = rng.choice(INGREDIENTS)
        actions.append(f"{verb} {noun}")
    return sorted(set(actions))


def render_description(ingredients, utensils, actions) -> str:
    """Deterministic textual stand-in for a frame-captioning pass."""
    return (
        f"Visible ingredients: {', '.join(ingredients) or 'none'}. "
        f"Utensils in use: {', '.join(utensils) or 'none'}. "
        f"Actions performed: {', '.join(actions) or 'none'}."
    )


def build_mock_workspace(
    root: str | Path,
    seed: int = 0,
    videos_per_type: int = 1,
    segments_per_video: int = 12,
    embedding_dim: int = 64,
    config_overrides: dict | None = None,
) -> Path:
    """Create a small, fully seeded workspace exercising every stage."""
    root = Path(root)
    for sub in ("annotations", "transcripts", "recipes", "frames", "curation"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    embedder = HashEmbeddingProvider(dimension=embedding_dim)

    config = {
        "seed": seed,
        "embedding_dim": embedding_dim,
        "compare": {"max_pairs": 40, "k_frames": 2},
        "qa": {"easy_segments_per_video": 3, "hard_combos": {"2": 2, "3": 2, "4": 1, "5": 1}},
        "providers": {"mode": "mock"},
    }
    if config_overrides:
        config.update(config_overrides)
    (root / "procflow.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")

    videos = []
    for btype in BIRYANI_TYPES:
        for v in range(videos_per_type):
            video_id = f"{btype}{v + 1}"
            duration = segments_per_video * 10
            videos.append(
                {
                    "video_id": video_id,
                    "biryani_type": btype,
                    "title": f"{btype.title()} Biryani Recipe {v + 1}",
                    "url": f"https://videos.example/{video_id}",
                    "duration_s": duration,
                    "frame_manifest": f"frames/{video_id}/manifest.json",
                }
            )
            _write_video_inputs(root, video_id, btype, duration, rng, embedder)
    (root / "videos.json").write_text(json.dumps(videos, indent=2, sort_keys=True) + "\n")

    for btype in BIRYANI_TYPES:
        recipe = {
            "biryani_type": btype,
            "chapters": [
                {"name": name, "steps": [sid for sid, _t, _d, ch in RECIPE_STEPS if ch == name]}
                for name in CHAPTER_ORDER
            ],
            "steps": [
                {
                    "id": sid,
                    "title": title,
                    "description": f"{desc} ({btype} style)",
                    "misc": chapter == "Misc",
                }
                for sid, title, desc, chapter in RECIPE_STEPS
            ],
        }
        (root / "recipes" / f"{btype}.json").write_text(
            json.dumps(recipe, indent=2, sort_keys=True) + "\n"
        )

    _write_easy_curation(root, config)
    return root


def _write_video_inputs(root, video_id, btype, duration, rng, embedder):
    segments = []
    for start in range(0, duration, 10):
        ingredients = sorted(rng.sample(INGREDIENTS, rng.randint(1, 4)))
        utensils = sorted(rng.sample(UTENSILS, rng.randint(1, 2)))
        actions = _segment_actions(rng)
        segments.append(
            {
                "timestamp": f"{start}-{start + 10}",
                "title": f"{btype.title()} Biryani Recipe",
                "url": f"https://videos.example/{video_id}?t={start}",
                "ingredients": ingredients,
                "utensils": utensils,
                "actions": actions,
            }
        )
    (root / "annotations" / f"{video_id}.json").write_text(
        json.dumps(segments, indent=2, sort_keys=True) + "\n"
    )

    sentences = []
    t = 0.0
    for sid, title, desc, _chapter in RECIPE_STEPS[:-1]:
        mention = rng.choice(INGREDIENTS)
        sentences.append(
            {
                "text": f"Now {desc.lower()}, do not forget the {mention}.",
                "start": t,
                "end": t + 8.0,
            }
        )
        t += 10.0
    (root / "transcripts" / f"{video_id}.json").write_text(
        json.dumps({"video_id": video_id, "sentences": sentences}, indent=2, sort_keys=True) + "\n"
    )

    frame_dir = root / "frames" / video_id
    frame_dir.mkdir(parents=True, exist_ok=True)
    frames = []
    texts = []
    for second in range(duration):
        name = f"f{second:04d}.png"
        (frame_dir / name).write_bytes(_TINY_PNG)
        frames.append(f"frames/{video_id}/{name}")
        segment = segments[second // 10]
        texts.append(segment["actions"][second % len(segment["actions"])])
    vectors = [[round(float(x), 9) for x in vec] for vec in embedder.embed_texts(texts)]
    (frame_dir / "embeddings.json").write_text(json.dumps(vectors) + "\n")
    manifest = {
        "video_id": video_id,
        "fps": 1.0,
        "frames": frames,
        "embeddings_file": f"frames/{video_id}/embeddings.json",
    }
    (frame_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_easy_curation(root: Path, config: dict) -> None:
    """Precompute deterministic easy-QA ids and keep two per video.

    Runs the same generation logic the qa-gen stage will run, so the
    curation file references real ids.
    """
    import zlib

    from .corpus import load_segment_annotations
    from .qa import generate_easy

    seed = config.get("seed", 0)
    chat = PipelineMockChat(seed)
    kept: list[str] = []
    for path in sorted((root / "annotations").glob("*.json")):
        video_id = path.stem
        segments = load_segment_annotations(path, video_id)
        described = [
            (i, (s.start_s, s.end_s), render_description(s.ingredients, s.utensils, s.actions))
            for i, s in enumerate(segments)
        ]
        # Same per-video seed derivation the qa-gen stage uses, so these ids
        # exist when the stage runs with --seed equal to the config seed.
        pairs = generate_easy(
            video_id,
            described,
            chat,
            seed=seed + zlib.crc32(video_id.encode("utf-8")),
            max_segments=config.get("qa", {}).get("easy_segments_per_video", 3),
        )
        kept.extend(p.qa_id for p in pairs[:2])
    (root / "curation" / "easy_keep.json").write_text(
        json.dumps({"keep": kept}, indent=2, sort_keys=True) + "\n"
    )


def build_phrase_fixture(total: int = 10481, seed: int = 11) -> list[str]:
    """Synthetic action-phrase space with clusterable concept groups.

    Phrases carry a concept tag; embeddings keyed on that tag (see the test
    helpers) place same-concept phrases well inside the merge threshold and
    different concepts well outside it.
    """
    rng = random.Random(seed)
    phrases: list[str] = []
    concept = 0
    while len(phrases) < total:
        group = min(rng.randint(1, 8), total - len(phrases))
        verb = VERBS[concept % len(VERBS)]
        noun = INGREDIENTS[(concept // len(VERBS)) % len(INGREDIENTS)]
        for i in range(group):
            phrases.append(f"{verb} {noun} c{concept:05d} v{i}")
        concept += 1
    return phrases


# ---------------------------------------------------------------------------
# Merging fixture
# ---------------------------------------------------------------------------


def build_merge_fixture(
    seed: int = 2024, total_segments: int = 16761, total_spans: int = 14479
) -> list[LabeledInterval]:
    """Synthetic per-video interval streams engineered to known merge counts.

    Runs of identical adjacent labels merge to one span each; consecutive
    runs either change label or sit across a gap, so the span count equals
    the run count exactly.
    """
    rng = random.Random(seed)
    reductions = total_segments - total_spans
    runs: list[int] = []
    remaining = reductions
    while remaining > 0:
        length = min(rng.randint(2, 4), remaining + 1)
        runs.append(length)
        remaining -= length - 1
    runs.extend([1] * (total_segments - sum(runs)))
    rng.shuffle(runs)

    labels = [f"{v} {i}" for v in VERBS for i in INGREDIENTS]
    segments: list[LabeledInterval] = []
    per_video = -(-len(runs) // 120)  # ceil: spread runs over 120 videos
    video_idx = 0
    t = 0
    prev_label = None
    for count, run_len in enumerate(runs):
        if count and count % per_video == 0:
            video_idx += 1
            t = 0
            prev_label = None
        video_id = f"video{video_idx:03d}"
        gap = prev_label is not None and rng.random() < 0.1
        if gap:
            t += 10
        if gap and rng.random() < 0.5:
            label = prev_label  # same label across a gap must stay separate
        else:
            label = rng.choice(labels)
            while label == prev_label:
                label = rng.choice(labels)
        for _ in range(run_len):
            segments.append(
                LabeledInterval(
                    segment_id=f"{video_id}:{t}",
                    video_id=video_id,
                    start_s=t,
                    end_s=t + 10,
                    label=label,
                )
            )
            t += 10
        prev_label = label
    return segments


# ---------------------------------------------------------------------------
# Review workspace (server + UI tests)
# ---------------------------------------------------------------------------


def build_review_workspace(root: str | Path, n_items: int = 40, seed: int = 7) -> Path:
    """Minimal workspace holding a comparison review pool and frame images."""
    root = Path(root)
    for sub in ("annotations", "transcripts", "recipes", "frames"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    (root / "procflow.json").write_text(json.dumps({"seed": seed}, sort_keys=True) + "\n")
    rng = random.Random(seed)
    frame_dir = root / "frames" / "review"
    frame_dir.mkdir(parents=True, exist_ok=True)
    for i in range(4):
        (frame_dir / f"f{i:02d}.png").write_bytes(_TINY_PNG)
    items = []
    for i in range(n_items):
        detected = i % 2 == 0
        action = f"{VERBS[i % len(VERBS)]} {INGREDIENTS[i % len(INGREDIENTS)]}"
        items.append(
            {
                "id": f"item-{i:04d}",
                "category": "detected" if detected else "no_difference",
                "action_class": action,
                "variation": f"more vigorous {action}",
                "clip_a": {
                    "video": f"vid{i % 5}",
                    "title": f"Video A {i}",
                    "biryani": BIRYANI_TYPES[i % 12],
                    "timestamp": f"{10 * i}-{10 * i + 10}",
                    "url": f"https://videos.example/a{i}",
                    "frames": ["frames/review/f00.png", "frames/review/f01.png"],
                },
                "clip_b": {
                    "video": f"vid{(i + 1) % 5}",
                    "title": f"Video B {i}",
                    "biryani": BIRYANI_TYPES[(i + 3) % 12],
                    "timestamp": f"{10 * i}-{10 * i + 10}",
                    "url": f"https://videos.example/b{i}",
                    "frames": ["frames/review/f02.png", "frames/review/f03.png"],
                },
                "model": {
                    "answer": "a" if detected else "c",
                    "confidence": 1 + rng.randint(0, 4),
                    "explanation": f"Observed difference {i}" if detected else "No clear difference",
                },
            }
        )
    pool_dir = root / "derived" / "compare"
    pool_dir.mkdir(parents=True, exist_ok=True)
    (pool_dir / "review_pool.json").write_text(
        json.dumps({"items": items}, indent=2, sort_keys=True) + "\n"
    )
    return root
