import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

from cinerank.data import MovieRecord
from cinerank.errors import NoNumberFound, OutOfRange, TransportError
from cinerank.llm import (
    GenParams,
    HttpLlmClient,
    ScriptedClient,
    SimilarityScore,
    build_description_prompt,
    build_similarity_prompt,
    extract_score,
    generate_description,
    mock_backend,
    score_similarity,
)
from cinerank.metadata import MovieMeta
from cinerank.profiles import AblationFlags, Favorite, build_manual_profile

# --- the worked similarity example, written out longhand ---------------------

EXPECTED_SYSTEM = (
    "You are a movie recommendation assistant. Your task is to evaluate how "
    "well a movie description aligns with a user's stated preferences and "
    "their favorite movies. Always respond with a number between -1.0 and 1.0, where:\n"
    "-1.0 means the movie goes completely against their preferences,\n"
    "0 means neutral or there isn't enough information,\n"
    "1.0 is a perfect match. You must respond with only the number, without "
    "any additional text or formatting under all circumstances."
)

EXPECTED_USER = "\n\n".join(
    [
        "Example 1:",
        "User input: I love science fiction with deep philosophical themes.",
        "I prefer movies with high IMDb ratings.",
        "User's favorite movies:",
        "Movie title: The Matrix (1999)",
        "Movie title: Blade Runner (1982)",
        "Movie title: Interstellar (2014)",
        "Preferred Release Date Range: I prefer movies released between 1980 and 2020.",
        "New movie to evaluate:",
        "Movie title: Inception (2010)",
        "IMDb Rating: 8.8/10",
        "Popularity Score: 93/100",
        "Movie description: A thief who steals corporate secrets through the use "
        "of dream-sharing technology is given the inverse task of planting an idea "
        "into the mind of a C.E.O., but his tragic past may doom the project and "
        "his team to disaster.",
        "Rate how likely you think the movie aligns with the user's interests "
        "(respond with a number in range [-1, 1]):",
        "0.9",
        "Example 2:",
        "User input: I enjoy light-hearted comedies with a lot of humor.",
        "I prefer popular/trending movies.",
        "User's favorite movies:",
        "Movie title: The Hangover (2009)",
        "Movie title: Superbad (2007)",
        "Movie title: Step Brothers (2008)",
        "Preferred Release Date Range: I prefer movies released between 2000 and 2010.",
        "New movie to evaluate:",
        "Movie title: The Dark Knight (2008)",
        "IMDb Rating: 9.0/10",
        "Popularity Score: 98/100",
        "Movie description: Set within a year after the events of Batman Begins "
        "(2005), Batman, Lieutenant James Gordon, and new District Attorney Harvey "
        "Dent successfully begin to round up the criminals that plague Gotham City, "
        "until a mysterious and sadistic criminal mastermind known only as "
        '"The Joker" appears in Gotham, creating a new wave of chaos.',
        "Rate how likely you think the movie aligns with the user's interests "
        "(respond with a number in range [-1, 1]):",
        "-0.7",
        "Example 3:",
        "User input: I am fascinated by historical documentaries.",
        "User's favorite movies:",
        "Movie title: They shall not grow old (2018)",
        "Movie title: Apollo 11 (2019)",
        "Movie title: 13th (2016)",
        "Preferred Release Date Range: I prefer movies released between 2010 and 2020.",
        "New movie to evaluate:",
        "Movie title: The Lord of the Rings: The Fellowship of the Ring (2001)",
        "IMDb Rating: 8.8/10",
        "Popularity Score: 95/100",
        "Movie description: A meek Hobbit from the Shire and eight companions set "
        "out on a journey to destroy the powerful One Ring and save Middle-earth "
        "from the Dark Lord Sauron.",
        "Rate how likely you think the movie aligns with the user's interests "
        "(respond with a number in range [-1, 1]):",
        "-0.5",
        "Now, respond to the following prompt:",
        "User input: I am drawn to science fiction and fantasy stories that are well written.",
        "I prefer movies with high IMDb ratings.",
        "I prefer popular/trending movies.",
        "User's favorite movies:",
        "Movie title: The Lord of the Rings: The Two Towers (2002)",
        "Movie title: Rogue One: A Star Wars Story (2016)",
        "Movie title: WALL·E (2008)",
        "Preferred Release Date Range: I prefer movies released between 2000 and 2020.",
        "New movie to evaluate:",
        "Movie title: Interstellar (2014)",
        "IMDb Rating: 8.6/10",
        "Popularity Score: 91/100",
        "Movie description: When Earth becomes uninhabitable in the future, a "
        "farmer and ex-NASA pilot, Joseph Cooper, is tasked to pilot a spacecraft, "
        "along with a team of researchers, to find a new planet for humans.",
        "Rate how likely you think the movie aligns with the user's interests "
        "(respond with a number in range [-1, 1]):",
    ]
)


def worked_example_profile():
    return build_manual_profile(
        text="I am drawn to science fiction and fantasy stories that are well written.",
        favorites=[
            Favorite(1, "The Lord of the Rings: The Two Towers", 2002),
            Favorite(2, "Rogue One: A Star Wars Story", 2016),
            Favorite(3, "WALL·E", 2008),
        ],
        rating_pref=True,
        popularity_pref=True,
        year_range=(2000, 2020),
        current_year=2026,
    )


def interstellar_candidate():
    record = MovieRecord(99, "Interstellar", 2014, frozenset({"Sci-Fi"}), "0000099")
    meta = MovieMeta.create(
        99,
        "When Earth becomes uninhabitable in the future, a farmer and ex-NASA "
        "pilot, Joseph Cooper, is tasked to pilot a spacecraft, along with a "
        "team of researchers, to find a new planet for humans.",
        imdb_rating=8.6,
        votes=910_000,
        source="provider",
    )
    return record, meta


class TestSimilarityPrompt:
    def test_worked_example_reproduced_byte_for_byte(self):
        record, meta = interstellar_candidate()
        system, user = build_similarity_prompt(worked_example_profile(), record, meta)
        assert system == EXPECTED_SYSTEM
        assert user == EXPECTED_USER

    def test_deterministic(self):
        record, meta = interstellar_candidate()
        a = build_similarity_prompt(worked_example_profile(), record, meta)
        b = build_similarity_prompt(worked_example_profile(), record, meta)
        assert a == b

    def test_flags_off_remove_preference_sentences(self):
        record, meta = interstellar_candidate()
        profile = build_manual_profile(
            text="Anything goes.", rating_pref=False, popularity_pref=False
        )
        _, user = build_similarity_prompt(profile, record, meta)
        tail = user.rsplit("Now, respond to the following prompt:", 1)[1]
        assert "I prefer movies with high IMDb ratings." not in tail
        assert "I prefer popular/trending movies." not in tail

    def test_absent_metadata_removes_rating_and_popularity_lines(self):
        record, _ = interstellar_candidate()
        meta = MovieMeta.create(99, "A space film.", source="generated")
        _, user = build_similarity_prompt(worked_example_profile(), record, meta)
        tail = user.rsplit("New movie to evaluate:", 1)[1]
        assert "IMDb Rating:" not in tail
        assert "Popularity Score:" not in tail
        assert "Movie description: A space film." in tail

    def test_stable_prefix_across_candidates(self):
        profile = worked_example_profile()
        rec_a, meta_a = interstellar_candidate()
        rec_b = MovieRecord(7, "Arrival", 2016, frozenset({"Sci-Fi"}), None)
        meta_b = MovieMeta.create(7, "Linguists decode an alien language.", source="generated")
        _, user_a = build_similarity_prompt(profile, rec_a, meta_a)
        _, user_b = build_similarity_prompt(profile, rec_b, meta_b)
        marker = "Now, respond to the following prompt:"
        assert user_a.split(marker)[0] == user_b.split(marker)[0]
        # and beyond: everything up to the candidate block is shared
        marker2 = "New movie to evaluate:"
        assert user_a.rsplit(marker2, 1)[0] == user_b.rsplit(marker2, 1)[0]


class TestAblations:
    @pytest.fixture
    def prompt_for(self):
        record, meta = interstellar_candidate()
        profile = worked_example_profile()

        def build(**flag_kwargs):
            _, user = build_similarity_prompt(
                profile, record, meta, AblationFlags(**flag_kwargs)
            )
            return user

        return build

    def test_drop_user_text(self, prompt_for):
        user = prompt_for(drop_user_text=True)
        assert "User input:" not in user

    def test_drop_descriptions(self, prompt_for):
        user = prompt_for(drop_descriptions=True)
        assert "Movie description:" not in user

    def test_drop_temporal(self, prompt_for):
        user = prompt_for(drop_temporal=True)
        assert "Preferred Release Date Range:" not in user

    def test_drop_popularity_rating_removes_lines_and_sentences(self, prompt_for):
        user = prompt_for(drop_popularity_rating=True)
        assert "IMDb Rating:" not in user
        assert "Popularity Score:" not in user
        assert "I prefer movies with high IMDb ratings." not in user
        assert "I prefer popular/trending movies." not in user

    def test_drop_favorites(self, prompt_for):
        user = prompt_for(drop_favorites=True)
        assert "User's favorite movies:" not in user
        # candidate "Movie title:" lines survive, one per block
        assert user.count("Movie title:") == 4

    def test_ablation_applies_to_examples_too(self, prompt_for):
        user = prompt_for(drop_temporal=True)
        head = user.split("Now, respond to the following prompt:")[0]
        assert "Preferred Release Date Range:" not in head


class TestDescriptionPrompt:
    def test_layout_frozen(self):
        system, user = build_description_prompt("Interstellar")
        assert system == (
            "You are a helpful assistant that generates concise movie descriptions. "
            "Do not use newlines in your response. The examples provided are for "
            "context only and should not appear in your output. Return only the description."
        )
        assert user == (
            "Example 1:\n"
            "Movie title: Inception\n"
            "Description: A thief who steals corporate secrets through dream-sharing "
            "technology is tasked with implanting an idea into a CEO's mind.\n"
            "\n"
            "Example 2:\n"
            "Movie title: The Matrix\n"
            "Description: A computer hacker discovers his reality is an illusion and "
            "joins rebels to fight its controllers.\n"
            "\n"
            "Generate a description for this movie:\n"
            "\n"
            "Movie title: Interstellar\n"
            "\n"
            "Description:"
        )

    def test_title_trimmed(self):
        _, user = build_description_prompt("  Heat  ")
        assert "Movie title: Heat\n" in user

    def test_empty_title_rejected(self):
        with pytest.raises(ValueError):
            build_description_prompt("   ")


class TestExtractScore:
    def test_plain_number(self):
        assert extract_score("0.9").value == approx(0.9)

    def test_first_number_wins_in_noisy_reply(self):
        assert extract_score("Score: -0.5 (documentary mismatch)").value == approx(-0.5)

    def test_out_of_range(self):
        with pytest.raises(OutOfRange) as exc:
            extract_score("-1.5")
        assert exc.value.value == approx(-1.5)

    def test_no_number(self):
        with pytest.raises(NoNumberFound):
            extract_score("no idea")

    @given(st.integers(-100, 100).map(lambda n: n / 100))
    def test_round_trip_two_decimals(self, v):
        assert extract_score(f"{v:.2f}").value == approx(v)

    def test_integer_token(self):
        assert extract_score("1").value == approx(1.0)
        assert extract_score("-1").value == approx(-1.0)


class TestScoreSimilarity:
    PROMPT = ("system", "user")

    def test_clean_reply_one_attempt(self):
        score = score_similarity(ScriptedClient(["0.75"]), self.PROMPT)
        assert score == SimilarityScore(value=0.75, attempts=1)

    def test_retry_then_success(self):
        score = score_similarity(ScriptedClient(["garbage", "0.3"]), self.PROMPT)
        assert score == SimilarityScore(value=0.3, attempts=2)

    def test_exhausted_retries_fall_back_to_neutral(self):
        score = score_similarity(ScriptedClient(["garbage"]), self.PROMPT, retries=2)
        assert score == SimilarityScore(value=0.0, attempts=3)

    def test_persistent_transport_failure_raises(self):
        client = ScriptedClient([TransportError("down")] * 4)
        with pytest.raises(TransportError):
            score_similarity(client, self.PROMPT, retries=3)

    def test_transport_blip_then_success(self):
        client = ScriptedClient([TransportError("down"), "0.5"])
        assert score_similarity(client, self.PROMPT).value == approx(0.5)

    def test_out_of_range_reply_retries(self):
        score = score_similarity(ScriptedClient(["1.8", "0.2"]), self.PROMPT)
        assert score == SimilarityScore(value=0.2, attempts=2)

    @given(st.sampled_from(["0.4", "junk", "2.0", "-0.9", ""]))
    def test_never_outside_range(self, reply):
        score = score_similarity(ScriptedClient([reply]), self.PROMPT, retries=1)
        assert -1.0 <= score.value <= 1.0


class TestMockBackends:
    def test_constant(self):
        client = mock_backend("constant", value=0.0)
        assert client.complete("s", "anything", GenParams()) == "0.0"

    def test_oracle_hits_target(self):
        record, meta = interstellar_candidate()
        _, user = build_similarity_prompt(worked_example_profile(), record, meta)
        client = mock_backend("oracle", target_titles={"Interstellar (2014)"})
        assert client.complete("s", user, GenParams()) == "1.0"
        miss = mock_backend("oracle", target_titles={"Arrival (2016)"})
        assert miss.complete("s", user, GenParams()) == "0.0"

    def test_oracle_ignores_example_titles(self):
        record, meta = interstellar_candidate()
        _, user = build_similarity_prompt(worked_example_profile(), record, meta)
        # Inception appears in example 1 but is not the live candidate
        client = mock_backend("oracle", target_titles={"Inception (2010)"})
        assert client.complete("s", user, GenParams()) == "0.0"

    def test_feature_linear_hand_computed(self):
        profile = build_manual_profile(
            text="I enjoy Action and Sci-Fi movies.",
            year_range=(2010, 2020),
            current_year=2026,
        )
        record = MovieRecord(5, "Star Crash", 2011, frozenset(), None)
        meta = MovieMeta.create(
            5, "A sci-fi action adventure among the stars.",
            imdb_rating=8.0, votes=500_000, source="provider",
        )
        _, user = build_similarity_prompt(profile, record, meta)
        client = mock_backend("feature")
        # 0.5*min(2,2)/2 + 0.1*8/10 + 0.1*50/100 + 0.3 = 0.93
        assert client.complete("s", user, GenParams()) == "0.93"

    def test_feature_linear_disjoint_and_out_of_range_is_negative(self):
        profile = build_manual_profile(
            text="I enjoy Horror movies.", year_range=(2000, 2020), current_year=2026
        )
        record = MovieRecord(6, "Sunny Days", 1950, frozenset(), None)
        meta = MovieMeta.create(
            6, "A drama romance.", imdb_rating=8.8, votes=930_000, source="provider"
        )
        _, user = build_similarity_prompt(profile, record, meta)
        value = float(mock_backend("feature").complete("s", user, GenParams()))
        assert value < 0

    def test_feature_linear_missing_features_contribute_zero(self):
        profile = build_manual_profile(
            text="I enjoy Horror movies.", year_range=(2000, 2020), current_year=2026
        )
        record = MovieRecord(6, "Sunny Days", 1950, frozenset(), None)
        meta = MovieMeta.create(
            6, "A drama romance.", imdb_rating=8.8, votes=930_000, source="provider"
        )
        _, user = build_similarity_prompt(
            profile, record, meta, AblationFlags(drop_temporal=True)
        )
        value = float(mock_backend("feature").complete("s", user, GenParams()))
        # year term gone: 0 + 0.088 + 0.093 = 0.18
        assert value == approx(0.18, abs=0.005)


class TestGenerateDescription:
    def test_newlines_collapsed(self):
        client = ScriptedClient(["A hero\nrises\n  again."])
        assert generate_description(client, "Heat") == "A hero rises again."

    def test_mock_clients_answer_description_prompts(self):
        client = mock_backend("constant", value=0.0)
        text = generate_description(client, "Heat (1995)")
        assert "Heat (1995)" in text
        assert "\n" not in text

    def test_persistent_empty_raises(self):
        from cinerank.errors import GenerationFailed

        with pytest.raises(GenerationFailed):
            generate_description(ScriptedClient(["", "", ""]), "Heat", retries=1)


class TestHttpClient:
    def make_client(self, **kwargs):
        return HttpLlmClient("http://llm.test", "phi-test", **kwargs)

    def test_request_shape_and_response_parse(self, monkeypatch):
        captured = {}

        class FakeResponse:
            status_code = 200

            def json(self):
                return {"choices": [{"message": {"content": "0.4"}}]}

        def fake_post(url, json=None, headers=None, timeout=None):
            captured.update(url=url, body=json, headers=headers)
            return FakeResponse()

        monkeypatch.setattr("cinerank.llm.requests.post", fake_post)
        client = self.make_client()
        out = client.complete("sys", "usr", GenParams(temperature=0.0, max_tokens=8))
        assert out == "0.4"
        assert captured["url"] == "http://llm.test/v1/chat/completions"
        assert captured["body"]["model"] == "phi-test"
        assert captured["body"]["messages"][0] == {"role": "system", "content": "sys"}
        assert captured["body"]["messages"][1] == {"role": "user", "content": "usr"}
        assert captured["body"]["temperature"] == 0.0
        assert captured["body"]["max_tokens"] == 8
        assert "Authorization" not in captured["headers"]

    def test_api_key_header(self, monkeypatch):
        captured = {}

        class FakeResponse:
            status_code = 200

            def json(self):
                return {"choices": [{"message": {"content": "ok"}}]}

        monkeypatch.setattr(
            "cinerank.llm.requests.post",
            lambda url, json=None, headers=None, timeout=None: (
                captured.update(headers=headers),
                FakeResponse(),
            )[1],
        )
        monkeypatch.setenv("CINERANK_LLM_API_KEY", "sk-test")
        self.make_client().complete("s", "u", GenParams())
        assert captured["headers"]["Authorization"] == "Bearer sk-test"

    def test_http_error_becomes_transport_error(self, monkeypatch):
        class FakeResponse:
            status_code = 503
            text = "overloaded"

        monkeypatch.setattr(
            "cinerank.llm.requests.post",
            lambda *a, **k: FakeResponse(),
        )
        with pytest.raises(TransportError):
            self.make_client().complete("s", "u", GenParams())

    def test_connection_error_becomes_transport_error(self, monkeypatch):
        import requests

        def boom(*a, **k):
            raise requests.ConnectionError("refused")

        monkeypatch.setattr("cinerank.llm.requests.post", boom)
        with pytest.raises(TransportError):
            self.make_client().complete("s", "u", GenParams())

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            self.make_client(mode="turbo")
