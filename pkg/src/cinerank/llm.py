"""Prompt construction, chat-completion clients, and score extraction.

Two prompt families are built here: few-shot description generation and
few-shot similarity scoring. Both render deterministically, and for a fixed
profile every candidate's scoring prompt shares one long stable prefix
(system message + examples), which lets prefix-caching inference servers
reuse work across a user's whole candidate pool.
"""

from __future__ import annotations

import os
import re
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence

import requests

from .data import MovieRecord
from .errors import GenerationFailed, NoNumberFound, OutOfRange, TransportError, UsageError
from .profiles import AblationFlags, PreferenceProfile

if TYPE_CHECKING:
    from .metadata import MovieMeta

DEFAULT_RETRIES = 3
NEUTRAL_SCORE = 0.0

MODES = ("development", "production", "mock")


@dataclass(frozen=True)
class GenParams:
    temperature: float = 0.0
    max_tokens: int = 8
    stop: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


SCORING_PARAMS = GenParams(temperature=0.0, max_tokens=8)
DESCRIPTION_PARAMS = GenParams(temperature=0.7, max_tokens=160)


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    attempts: int = 1

    def __post_init__(self):
        if not -1.0 <= self.value <= 1.0:
            raise ValueError(f"similarity {self.value} outside [-1, 1]")
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")


def title_line(title: str, year: int | None) -> str:
    return f"{title} ({year})" if year is not None else title


# --- description generation -------------------------------------------------

DESCRIPTION_SYSTEM = (
    "You are a helpful assistant that generates concise movie descriptions. "
    "Do not use newlines in your response. The examples provided are for "
    "context only and should not appear in your output. Return only the description."
)

_DESCRIPTION_EXAMPLES = (
    (
        "Inception",
        "A thief who steals corporate secrets through dream-sharing technology "
        "is tasked with implanting an idea into a CEO's mind.",
    ),
    (
        "The Matrix",
        "A computer hacker discovers his reality is an illusion and joins "
        "rebels to fight its controllers.",
    ),
)


def build_description_prompt(title: str) -> tuple[str, str]:
    """(system, user) pair asking for a one-line description of `title`."""
    title = title.strip()
    if not title:
        raise ValueError("title must be non-empty")
    parts = []
    for i, (ex_title, ex_desc) in enumerate(_DESCRIPTION_EXAMPLES, start=1):
        parts.append(f"Example {i}:\nMovie title: {ex_title}\nDescription: {ex_desc}")
    parts.append("Generate a description for this movie:")
    parts.append(f"Movie title: {title}")
    parts.append("Description:")
    return DESCRIPTION_SYSTEM, "\n\n".join(parts)


# --- similarity scoring -----------------------------------------------------

SIMILARITY_SYSTEM = (
    "You are a movie recommendation assistant. Your task is to evaluate how "
    "well a movie description aligns with a user's stated preferences and "
    "their favorite movies. Always respond with a number between -1.0 and 1.0, where:\n"
    "-1.0 means the movie goes completely against their preferences,\n"
    "0 means neutral or there isn't enough information,\n"
    "1.0 is a perfect match. You must respond with only the number, without "
    "any additional text or formatting under all circumstances."
)

RATING_PREF_LINE = "I prefer movies with high IMDb ratings."
POPULARITY_PREF_LINE = "I prefer popular/trending movies."
RATE_LINE = (
    "Rate how likely you think the movie aligns with the user's interests "
    "(respond with a number in range [-1, 1]):"
)
LIVE_QUERY_MARKER = "Now, respond to the following prompt:"
NEW_MOVIE_MARKER = "New movie to evaluate:"


@dataclass(frozen=True)
class _Block:
    """One scoring block: the profile half plus the candidate half."""

    user_text: str
    rating_pref: bool
    popularity_pref: bool
    favorites: tuple[str, ...]
    year_min: int
    year_max: int
    candidate_title: str
    imdb_rating: float | None
    popularity: float | None
    description: str | None


_SIMILARITY_EXAMPLES: tuple[tuple[_Block, str], ...] = (
    (
        _Block(
            user_text="I love science fiction with deep philosophical themes.",
            rating_pref=True,
            popularity_pref=False,
            favorites=("The Matrix (1999)", "Blade Runner (1982)", "Interstellar (2014)"),
            year_min=1980,
            year_max=2020,
            candidate_title="Inception (2010)",
            imdb_rating=8.8,
            popularity=93,
            description=(
                "A thief who steals corporate secrets through the use of "
                "dream-sharing technology is given the inverse task of planting "
                "an idea into the mind of a C.E.O., but his tragic past may doom "
                "the project and his team to disaster."
            ),
        ),
        "0.9",
    ),
    (
        _Block(
            user_text="I enjoy light-hearted comedies with a lot of humor.",
            rating_pref=False,
            popularity_pref=True,
            favorites=("The Hangover (2009)", "Superbad (2007)", "Step Brothers (2008)"),
            year_min=2000,
            year_max=2010,
            candidate_title="The Dark Knight (2008)",
            imdb_rating=9.0,
            popularity=98,
            description=(
                "Set within a year after the events of Batman Begins (2005), "
                "Batman, Lieutenant James Gordon, and new District Attorney Harvey "
                "Dent successfully begin to round up the criminals that plague "
                'Gotham City, until a mysterious and sadistic criminal mastermind '
                'known only as "The Joker" appears in Gotham, creating a new wave '
                "of chaos."
            ),
        ),
        "-0.7",
    ),
    (
        _Block(
            user_text="I am fascinated by historical documentaries.",
            rating_pref=False,
            popularity_pref=False,
            favorites=("They shall not grow old (2018)", "Apollo 11 (2019)", "13th (2016)"),
            year_min=2010,
            year_max=2020,
            candidate_title="The Lord of the Rings: The Fellowship of the Ring (2001)",
            imdb_rating=8.8,
            popularity=95,
            description=(
                "A meek Hobbit from the Shire and eight companions set out on a "
                "journey to destroy the powerful One Ring and save Middle-earth "
                "from the Dark Lord Sauron."
            ),
        ),
        "-0.5",
    ),
)


def _render_block(block: _Block, flags: AblationFlags) -> list[str]:
    """Paragraph list for one block, honoring ablations uniformly."""
    parts: list[str] = []
    if block.user_text and not flags.drop_user_text:
        parts.append(f"User input: {block.user_text}")
    if not flags.drop_popularity_rating:
        if block.rating_pref:
            parts.append(RATING_PREF_LINE)
        if block.popularity_pref:
            parts.append(POPULARITY_PREF_LINE)
    if block.favorites and not flags.drop_favorites:
        parts.append("User's favorite movies:")
        parts.extend(f"Movie title: {t}" for t in block.favorites)
    if not flags.drop_temporal:
        parts.append(
            "Preferred Release Date Range: I prefer movies released between "
            f"{block.year_min} and {block.year_max}."
        )
    parts.append(NEW_MOVIE_MARKER)
    parts.append(f"Movie title: {block.candidate_title}")
    if not flags.drop_popularity_rating:
        if block.imdb_rating is not None:
            parts.append(f"IMDb Rating: {block.imdb_rating:.1f}/10")
        if block.popularity is not None:
            parts.append(f"Popularity Score: {round(block.popularity)}/100")
    if block.description and not flags.drop_descriptions:
        parts.append(f"Movie description: {block.description}")
    parts.append(RATE_LINE)
    return parts


@lru_cache(maxsize=None)
def _examples_prefix(flags: AblationFlags) -> tuple[str, ...]:
    parts: list[str] = []
    for i, (block, answer) in enumerate(_SIMILARITY_EXAMPLES, start=1):
        parts.append(f"Example {i}:")
        parts.extend(_render_block(block, flags))
        parts.append(answer)
    parts.append(LIVE_QUERY_MARKER)
    return tuple(parts)


def build_similarity_prompt(
    profile: PreferenceProfile,
    record: MovieRecord,
    meta: "MovieMeta | None",
    flags: AblationFlags = AblationFlags(),
) -> tuple[str, str]:
    """(system, user) pair scoring one candidate against one profile.

    The system message and the three worked examples are byte-identical
    across candidates; only the final block varies.
    """
    live = _Block(
        user_text=profile.preference_text,
        rating_pref=profile.rating_pref,
        popularity_pref=profile.popularity_pref,
        favorites=tuple(title_line(f.title, f.year) for f in profile.favorites),
        year_min=profile.year_min,
        year_max=profile.year_max,
        candidate_title=title_line(record.title, record.release_year),
        imdb_rating=getattr(meta, "imdb_rating", None) if meta else None,
        popularity=getattr(meta, "popularity", None) if meta else None,
        description=getattr(meta, "description", None) if meta else None,
    )
    parts = list(_examples_prefix(flags))
    parts.extend(_render_block(live, flags))
    return SIMILARITY_SYSTEM, "\n\n".join(parts)


# --- score extraction and retry ---------------------------------------------

_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.\d*|\.\d+|\d+)")


def extract_score(completion: str) -> SimilarityScore:
    """First signed decimal number in the completion, required to be in [-1, 1]."""
    m = _NUMBER_RE.search(completion)
    if m is None:
        raise NoNumberFound(f"no number in completion {completion!r}")
    value = float(m.group())
    if not -1.0 <= value <= 1.0:
        raise OutOfRange(value)
    return SimilarityScore(value=value, attempts=1)


def score_similarity(
    client,
    prompt: tuple[str, str],
    retries: int = DEFAULT_RETRIES,
    params: GenParams = SCORING_PARAMS,
) -> SimilarityScore:
    """Score one prompt, retrying on bad completions or transport hiccups.

    Extraction failures after all retries collapse to the neutral score 0.0;
    a transport failure that persists through the final attempt raises.
    """
    if retries < 0:
        raise ValueError("retries must be >= 0")
    system, user = prompt
    last_transport: TransportError | None = None
    for attempt in range(1, retries + 2):
        try:
            completion = client.complete(system, user, params)
        except TransportError as exc:
            last_transport = exc
            continue
        last_transport = None
        try:
            score = extract_score(completion)
        except (NoNumberFound, OutOfRange):
            continue
        return SimilarityScore(value=score.value, attempts=attempt)
    if last_transport is not None:
        raise last_transport
    return SimilarityScore(value=NEUTRAL_SCORE, attempts=retries + 1)


def generate_description(
    client,
    title: str,
    retries: int = DEFAULT_RETRIES,
    params: GenParams = DESCRIPTION_PARAMS,
) -> str:
    """One-line description of `title`; whitespace and newlines collapsed."""
    prompt = build_description_prompt(title)
    last_error: Exception | None = None
    for _ in range(retries + 1):
        try:
            completion = client.complete(prompt[0], prompt[1], params)
        except TransportError as exc:
            last_error = exc
            continue
        text = " ".join(completion.split())
        if text:
            return text
        last_error = GenerationFailed(f"empty completion for {title!r}")
    raise GenerationFailed(f"could not generate a description for {title!r}: {last_error}")


# --- clients ------------------------------------------------------------------


class HttpLlmClient:
    """OpenAI-compatible chat-completions client.

    A bounded semaphore caps in-flight requests (default 1, which keeps
    candidate prompts arriving sequentially so the server can reuse the
    shared prompt prefix).
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        mode: str = "development",
        api_key_env: str = "CINERANK_LLM_API_KEY",
        timeout: float = 120.0,
        in_flight_cap: int = 1,
    ):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if in_flight_cap < 1:
            raise ValueError("in_flight_cap must be >= 1")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.mode = mode
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._sem = threading.BoundedSemaphore(in_flight_cap)

    def complete(self, system: str, user: str, params: GenParams) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.stop:
            body["stop"] = list(params.stop)
        headers = {}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        with self._sem:
            try:
                resp = requests.post(
                    f"{self.base_url}/v1/chat/completions",
                    json=body,
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                raise TransportError(f"chat completion request failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"chat completion HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"malformed completion response: {exc}") from exc


class _MockClient:
    """Deterministic in-process client; subclasses implement the scoring rule."""

    mode = "mock"

    def complete(self, system: str, user: str, params: GenParams) -> str:
        if "Generate a description for this movie:" in user:
            title = _last_title_line(user) or "an untitled film"
            return f"A deterministic stand-in description for {title}."
        return self.score(user)

    def score(self, user: str) -> str:
        raise NotImplementedError


def _last_title_line(user: str) -> str | None:
    matches = re.findall(r"^Movie title: (.+)$", user, flags=re.MULTILINE)
    return matches[-1] if matches else None


def _target_block(user: str) -> tuple[str, str]:
    """(profile text, candidate text) of the live query."""
    live = user.rsplit(LIVE_QUERY_MARKER, 1)[-1]
    head, _, tail = live.rpartition(NEW_MOVIE_MARKER)
    return head, tail


class ConstantClient(_MockClient):
    def __init__(self, value: float = 0.0):
        self.value = float(value)

    def score(self, user: str) -> str:
        return str(self.value)


class OracleClient(_MockClient):
    """Returns 1.0 when the candidate title matches a target, else 0.0."""

    def __init__(self, target_titles: Sequence[str]):
        self.target_titles = set(target_titles)

    def score(self, user: str) -> str:
        _, candidate = _target_block(user)
        m = re.search(r"^Movie title: (.+)$", candidate, flags=re.MULTILINE)
        if m and m.group(1) in self.target_titles:
            return "1.0"
        return "0.0"


GENRE_VOCABULARY = frozenset(
    g.lower()
    for g in (
        "Action", "Adventure", "Animation", "Children", "Comedy", "Crime",
        "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror", "IMAX",
        "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
    )
)

_WORD_RE = re.compile(r"[a-z][a-z-]*")


def _genre_tokens(text: str) -> set[str]:
    return {w for w in _WORD_RE.findall(text.lower()) if w in GENRE_VOCABULARY}


class FeatureLinearClient(_MockClient):
    """Scores as a fixed linear rule over features parsed back out of the prompt.

    score = 0.5 * min(genre_overlap, 2) / 2
          + 0.1 * rating / 10
          + 0.1 * popularity / 100
          + 0.3 * (+1 if year in preferred range else -1)

    Features absent from the prompt contribute 0, so the rule reacts to
    ablations exactly the way a text-only reader would.
    """

    def score(self, user: str) -> str:
        profile_part, candidate_part = _target_block(user)
        score = 0.0

        user_input = re.search(r"^User input: (.+)$", profile_part, flags=re.MULTILINE)
        title = re.search(r"^Movie title: (.+)$", candidate_part, flags=re.MULTILINE)
        desc = re.search(r"^Movie description: (.+)$", candidate_part, flags=re.MULTILINE)
        if user_input:
            wanted = _genre_tokens(user_input.group(1))
            candidate_text = (title.group(1) if title else "") + " " + (desc.group(1) if desc else "")
            overlap = len(wanted & _genre_tokens(candidate_text))
            score += 0.5 * min(overlap, 2) / 2

        rating = re.search(r"^IMDb Rating: ([\d.]+)/10$", candidate_part, flags=re.MULTILINE)
        if rating:
            score += 0.1 * float(rating.group(1)) / 10
        pop = re.search(r"^Popularity Score: (\d+)/100$", candidate_part, flags=re.MULTILINE)
        if pop:
            score += 0.1 * int(pop.group(1)) / 100

        year = re.search(r"\((\d{4})\)\s*$", title.group(1)) if title else None
        rng = re.search(
            r"released between (\d{4}) and (\d{4})\.", profile_part
        )
        if year and rng:
            y = int(year.group(1))
            lo, hi = int(rng.group(1)), int(rng.group(2))
            score += 0.3 if lo <= y <= hi else -0.3

        return f"{max(-1.0, min(1.0, score)):.2f}"


class ScriptedClient(_MockClient):
    """Replays a fixed reply sequence; exceptions in the list are raised.

    The last entry repeats once the script is exhausted. Used to exercise
    retry behavior.
    """

    def __init__(self, replies: Sequence):
        if not replies:
            raise ValueError("need at least one scripted reply")
        self.replies = list(replies)
        self.calls = 0

    def complete(self, system: str, user: str, params: GenParams) -> str:
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        if isinstance(reply, Exception):
            raise reply
        return reply


def mock_backend(rule: str, **kwargs) -> _MockClient:
    """Deterministic test backend: 'constant', 'oracle', or 'feature'."""
    if rule == "constant":
        return ConstantClient(kwargs.get("value", 0.0))
    if rule == "oracle":
        return OracleClient(kwargs["target_titles"])
    if rule == "feature":
        return FeatureLinearClient()
    raise ValueError(f"unknown mock rule {rule!r}")


def client_from_spec(spec: str, http_options: dict | None = None):
    """Client from a backend spec string.

    Specs: "http", "mock:neutral", "mock:feature", "mock:constant=<v>",
    "mock:oracle=Title (Year)[|Title2 (Year)...]". http_options supplies
    HttpLlmClient keyword arguments for the "http" spec.
    """
    if spec == "http":
        return HttpLlmClient(**(http_options or {}))
    if not spec.startswith("mock:"):
        raise UsageError(f"unknown llm backend {spec!r}")
    rule, _, arg = spec[len("mock:"):].partition("=")
    if rule == "neutral":
        return ConstantClient(0.0)
    if rule == "constant":
        try:
            return ConstantClient(float(arg))
        except ValueError as exc:
            raise UsageError(f"bad constant value {arg!r}") from exc
    if rule == "feature":
        return FeatureLinearClient()
    if rule == "oracle":
        return OracleClient([t for t in arg.split("|") if t])
    raise UsageError(f"unknown mock rule {rule!r}")
