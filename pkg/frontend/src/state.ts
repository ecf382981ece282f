// Draft state, client-side validation, and request lifecycle. No DOM in
// here: app.ts owns rendering, which keeps this whole layer testable in
// plain node.

import {
  ApiClient,
  ApiError,
  ProfileEcho,
  ProfilePayload,
  RecommendItem,
  RecommendResponse,
  SearchHit,
} from "./api";

export interface FavoriteChip {
  movie_id: number;
  title: string;
  year: number | null;
}

export interface UiProfileDraft {
  preference_text: string;
  favorites: FavoriteChip[];
  rating_pref: boolean;
  popularity_pref: boolean;
  year_min: number | null;
  year_max: number | null;
}

export function emptyDraft(): UiProfileDraft {
  return {
    preference_text: "",
    favorites: [],
    rating_pref: false,
    popularity_pref: false,
    year_min: null,
    year_max: null,
  };
}

export interface DraftProblem {
  field: string;
  message: string;
}

// Server default when a bound is left open.
const YEAR_MIN_DEFAULT = 1870;

/** Mirror of the service's profile rules, checked before any request so a
 *  draft the server would reject never leaves the browser. Same checks,
 *  same order, same messages. */
export function validateDraft(draft: UiProfileDraft, currentYear: number): DraftProblem | null {
  if (!draft.preference_text.trim() && draft.favorites.length === 0) {
    return {
      field: "preference_text",
      message: "a profile needs preference text or favorite movies",
    };
  }
  const min = draft.year_min ?? YEAR_MIN_DEFAULT;
  const max = draft.year_max ?? currentYear;
  if (min > max) {
    return { field: "year_min", message: `year_min ${min} > year_max ${max}` };
  }
  if (min % 10 !== 0) {
    return { field: "year_min", message: `year_min ${min} must start a decade` };
  }
  if (max % 10 !== 0 && max !== currentYear) {
    return {
      field: "year_max",
      message: `year_max ${max} must start a decade or be the current year`,
    };
  }
  return null;
}

export function validateN(n: number): DraftProblem | null {
  if (!Number.isInteger(n) || n < 1 || n > 100) {
    return { field: "n", message: "n must be an integer in [1, 100]" };
  }
  return null;
}

/** Request body for the draft; fields at their defaults are omitted. */
export function toProfilePayload(draft: UiProfileDraft): ProfilePayload {
  const payload: ProfilePayload = {};
  const text = draft.preference_text.trim();
  if (text) payload.preference_text = text;
  if (draft.favorites.length) payload.favorites = draft.favorites.map((f) => f.movie_id);
  if (draft.rating_pref) payload.rating_pref = true;
  if (draft.popularity_pref) payload.popularity_pref = true;
  if (draft.year_min !== null) payload.year_min = draft.year_min;
  if (draft.year_max !== null) payload.year_max = draft.year_max;
  return payload;
}

/** Rebuild a draft from the service's profile echo (favorites come back
 *  as [id, title, year] triples). */
export function draftFromEcho(echo: ProfileEcho): UiProfileDraft {
  return {
    preference_text: echo.preference_text,
    favorites: echo.favorites.map(([movie_id, title, year]) => ({ movie_id, title, year })),
    rating_pref: echo.rating_pref,
    popularity_pref: echo.popularity_pref,
    year_min: echo.year_min,
    year_max: echo.year_max,
  };
}

export interface DisplayRow {
  rank: string;
  title: string;
  year: string;
  sim: string;
  base_pred: string;
}

/** Display strings for a result table. Numbers pass through String() so
 *  what the user sees is exactly the value the service sent. */
export function renderRows(items: RecommendItem[]): DisplayRow[] {
  return items.map((item) => ({
    rank: String(item.rank),
    title: item.title,
    year: item.year === null ? "" : String(item.year),
    sim: String(item.sim),
    base_pred: String(item.base_pred),
  }));
}

export type SearchPhase =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "done"; hits: SearchHit[] }
  | { kind: "failed"; message: string };

export type RecommendPhase =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "done"; result: RecommendResponse }
  | { kind: "blocked"; problem: DraftProblem }
  | { kind: "failed"; status: number; code: string; message: string };

export class AppStore {
  draft: UiProfileDraft = emptyDraft();
  n = 10;
  search: SearchPhase = { kind: "idle" };
  recommend: RecommendPhase = { kind: "idle" };
  onChange: () => void = () => {};

  private api: ApiClient;
  private currentYear: number;
  private searchTicket = 0;
  private recommendTicket = 0;

  constructor(api: ApiClient, currentYear?: number) {
    this.api = api;
    this.currentYear = currentYear ?? new Date().getFullYear();
  }

  addFavorite(hit: { movie_id: number; title: string; year: number | null }): void {
    if (this.draft.favorites.some((f) => f.movie_id === hit.movie_id)) return;
    this.draft.favorites.push({ movie_id: hit.movie_id, title: hit.title, year: hit.year });
    this.onChange();
  }

  removeFavorite(movieId: number): void {
    this.draft.favorites = this.draft.favorites.filter((f) => f.movie_id !== movieId);
    this.onChange();
  }

  async runSearch(query: string): Promise<void> {
    const q = query.trim();
    if (!q) {
      // empty input is not an error and sends nothing
      this.search = { kind: "idle" };
      this.onChange();
      return;
    }
    const ticket = ++this.searchTicket;
    this.search = { kind: "loading" };
    this.onChange();
    try {
      const response = await this.api.search(q);
      if (ticket !== this.searchTicket) return;
      this.search = { kind: "done", hits: response.results };
    } catch (err) {
      if (ticket !== this.searchTicket) return;
      const message = err instanceof ApiError ? err.message : String(err);
      this.search = { kind: "failed", message };
    }
    this.onChange();
  }

  /** Validate, then POST /recommend. A submit while another request is in
   *  flight supersedes it: the older response is dropped when it lands. */
  async runRecommend(): Promise<void> {
    const problem = validateDraft(this.draft, this.currentYear) ?? validateN(this.n);
    if (problem) {
      this.recommend = { kind: "blocked", problem };
      this.onChange();
      return;
    }
    const ticket = ++this.recommendTicket;
    this.recommend = { kind: "loading" };
    this.onChange();
    try {
      const result = await this.api.recommend({
        profile: toProfilePayload(this.draft),
        n: this.n,
      });
      if (ticket !== this.recommendTicket) return;
      this.recommend = { kind: "done", result };
    } catch (err) {
      if (ticket !== this.recommendTicket) return;
      if (err instanceof ApiError) {
        this.recommend = { kind: "failed", status: err.status, code: err.code, message: err.message };
      } else {
        this.recommend = { kind: "failed", status: 0, code: "InternalError", message: String(err) };
      }
    }
    this.onChange();
  }
}
