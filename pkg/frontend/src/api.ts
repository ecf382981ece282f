// Typed client for the /api/v1 JSON contract. Every shape here mirrors a
// service response verbatim; the UI renders these payloads and never
// computes a score of its own.

export interface HealthInfo {
  status: string;
  algo: string;
  users: number;
  movies: number;
  dataset_fingerprint: string;
  config_hash: string;
}

export interface SearchHit {
  movie_id: number;
  title: string; // formatted "Title (Year)"
  year: number | null;
  genres: string[];
  score: number;
}

export interface SearchResponse {
  query: string;
  results: SearchHit[];
}

// POST bodies accept favorites as bare movie ids; the echo expands them
// to [id, title, year] triples.
export interface ProfilePayload {
  preference_text?: string;
  favorites?: number[];
  rating_pref?: boolean;
  popularity_pref?: boolean;
  year_min?: number;
  year_max?: number;
  user_id?: number;
}

export interface ProfileEcho {
  schema_version: number;
  user_id: number | null;
  preference_text: string;
  favorites: [number, string, number | null][];
  rating_pref: boolean;
  popularity_pref: boolean;
  year_min: number;
  year_max: number;
}

export interface RecommendRequest {
  profile?: ProfilePayload;
  user_id?: number;
  n?: number;
  ablation?: string[];
}

export interface RecommendItem {
  movie_id: number;
  title: string; // bare title; year ships separately
  year: number | null;
  sim: number;
  base_pred: number;
  rank: number;
}

export interface RecommendTiming {
  base_ms: number;
  llm_ms: number;
  total_ms: number;
}

export interface RecommendResponse {
  user_id: number | null;
  items: RecommendItem[];
  timing: RecommendTiming;
}

export interface MovieMetaInfo {
  description: string;
  imdb_rating: number | null;
  popularity: number | null;
  votes: number | null;
  source: string;
}

export interface MovieDetail {
  movie_id: number;
  title: string;
  year: number | null;
  genres: string[];
  meta?: MovieMetaInfo;
}

/** Non-2xx responses and transport failures, carrying the service's
 *  {error, message} payload when one was returned. status 0 means the
 *  request never reached the service. */
export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private base: string;
  private fetchImpl: FetchLike;

  constructor(base = "", fetchImpl?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  health(): Promise<HealthInfo> {
    return this.request("GET", "/api/v1/health");
  }

  search(query: string): Promise<SearchResponse> {
    return this.request("GET", `/api/v1/search?q=${encodeURIComponent(query)}`);
  }

  previewProfile(profile: ProfilePayload): Promise<ProfileEcho> {
    return this.request("POST", "/api/v1/profile", profile);
  }

  recommend(body: RecommendRequest): Promise<RecommendResponse> {
    return this.request("POST", "/api/v1/recommend", body);
  }

  movie(movieId: number): Promise<MovieDetail> {
    return this.request("GET", `/api/v1/movies/${movieId}`);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "NetworkError", err instanceof Error ? err.message : String(err));
    }
    if (!response.ok) {
      let code = "HttpError";
      let message = `request failed with status ${response.status}`;
      try {
        const payload: unknown = await response.json();
        if (payload && typeof payload === "object") {
          const record = payload as Record<string, unknown>;
          if (typeof record.error === "string") code = record.error;
          if (typeof record.message === "string") message = record.message;
        }
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }
}
