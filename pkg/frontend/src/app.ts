// DOM wiring for index.html. All state transitions live in AppStore;
// this file only reads events and paints the current store snapshot.

import { ApiClient, ApiError, MovieDetail, SearchHit } from "./api";
import { AppStore, FavoriteChip, renderRows } from "./state";

const DEBOUNCE_MS = 250;
const YEAR_FLOOR = 1870;

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function option(value: string, label: string): HTMLOptionElement {
  const opt = document.createElement("option");
  opt.value = value;
  opt.textContent = label;
  return opt;
}

function fillYearSelect(select: HTMLSelectElement, currentYear: number, isMax: boolean): void {
  select.appendChild(option("", "any"));
  for (let decade = YEAR_FLOOR; decade <= currentYear; decade += 10) {
    select.appendChild(option(String(decade), String(decade)));
  }
  // the service also accepts the current year as an upper bound
  if (isMax && currentYear % 10 !== 0) {
    select.appendChild(option(String(currentYear), String(currentYear)));
  }
}

function main(): void {
  const api = new ApiClient("");
  const currentYear = new Date().getFullYear();
  const store = new AppStore(api, currentYear);

  const healthLine = byId<HTMLParagraphElement>("health-line");
  const banner = byId<HTMLDivElement>("banner");
  const bannerText = byId<HTMLSpanElement>("banner-text");
  const bannerRetry = byId<HTMLButtonElement>("banner-retry");
  const searchBox = byId<HTMLInputElement>("search-box");
  const searchResults = byId<HTMLUListElement>("search-results");
  const chips = byId<HTMLDivElement>("chips");
  const prefText = byId<HTMLTextAreaElement>("pref-text");
  const ratingPref = byId<HTMLInputElement>("rating-pref");
  const popularityPref = byId<HTMLInputElement>("popularity-pref");
  const yearMin = byId<HTMLSelectElement>("year-min");
  const yearMax = byId<HTMLSelectElement>("year-max");
  const rangeError = byId<HTMLSpanElement>("range-error");
  const nInput = byId<HTMLInputElement>("n-input");
  const goButton = byId<HTMLButtonElement>("go");
  const draftError = byId<HTMLParagraphElement>("draft-error");
  const recommendStatus = byId<HTMLParagraphElement>("recommend-status");
  const resultsTable = byId<HTMLTableElement>("results-table");
  const resultsBody = byId<HTMLTableSectionElement>("results-body");
  const detail = byId<HTMLDivElement>("detail");

  fillYearSelect(yearMin, currentYear, false);
  fillYearSelect(yearMax, currentYear, true);

  function showBanner(message: string): void {
    bannerText.textContent = message;
    banner.classList.remove("hidden");
  }

  function renderSearch(): void {
    searchResults.textContent = "";
    const phase = store.search;
    if (phase.kind === "loading") {
      const li = document.createElement("li");
      li.className = "muted";
      li.textContent = "searching…";
      searchResults.appendChild(li);
      return;
    }
    if (phase.kind !== "done") return;
    if (phase.hits.length === 0) {
      const li = document.createElement("li");
      li.className = "muted";
      li.textContent = "no matches";
      searchResults.appendChild(li);
      return;
    }
    for (const hit of phase.hits) {
      searchResults.appendChild(searchRow(hit));
    }
  }

  function searchRow(hit: SearchHit): HTMLLIElement {
    const li = document.createElement("li");
    const label = document.createElement("span");
    label.textContent = `${hit.title} · ${hit.genres.join(", ")}`;
    const add = document.createElement("button");
    add.textContent = "+ favorite";
    add.addEventListener("click", () => {
      store.addFavorite(hit);
      searchBox.value = "";
      void store.runSearch("");
    });
    li.append(label, add);
    return li;
  }

  function chipNode(fav: FavoriteChip): HTMLSpanElement {
    const chip = document.createElement("span");
    chip.className = "chip";
    chip.textContent = fav.title;
    const remove = document.createElement("button");
    remove.textContent = "×";
    remove.title = "remove";
    remove.addEventListener("click", () => store.removeFavorite(fav.movie_id));
    chip.appendChild(remove);
    return chip;
  }

  function renderChips(): void {
    chips.textContent = "";
    for (const fav of store.draft.favorites) {
      chips.appendChild(chipNode(fav));
    }
  }

  async function showDetail(movieId: number): Promise<void> {
    detail.classList.remove("hidden");
    detail.textContent = "loading…";
    let info: MovieDetail;
    try {
      info = await api.movie(movieId);
    } catch (err) {
      detail.textContent = err instanceof ApiError ? err.message : String(err);
      return;
    }
    detail.textContent = "";
    const title = document.createElement("strong");
    title.textContent = info.title;
    detail.appendChild(title);
    const genres = document.createElement("p");
    genres.className = "muted";
    genres.textContent = info.genres.join(", ");
    detail.appendChild(genres);
    if (info.meta) {
      const plot = document.createElement("p");
      plot.textContent = info.meta.description;
      detail.appendChild(plot);
      if (info.meta.imdb_rating !== null) {
        const facts = document.createElement("p");
        facts.className = "muted";
        facts.textContent = `rated ${String(info.meta.imdb_rating)} · source: ${info.meta.source}`;
        detail.appendChild(facts);
      }
    }
  }

  function renderRecommend(): void {
    draftError.textContent = "";
    rangeError.textContent = "";
    recommendStatus.textContent = "";
    const phase = store.recommend;
    if (phase.kind === "blocked") {
      // 400-class problems never leave the browser; point at the field
      const message = phase.problem.message;
      if (phase.problem.field.startsWith("year")) rangeError.textContent = message;
      else draftError.textContent = message;
      return;
    }
    if (phase.kind === "loading") {
      recommendStatus.textContent = "scoring candidates…";
      return;
    }
    if (phase.kind === "failed") {
      if (phase.status === 503) {
        recommendStatus.textContent = `language model backend unavailable: ${phase.message}`;
      } else if (phase.status === 400) {
        draftError.textContent = phase.message;
      } else {
        showBanner(`service unreachable: ${phase.message}`);
      }
      return;
    }
    if (phase.kind !== "done") return;

    resultsTable.classList.remove("hidden");
    resultsBody.textContent = "";
    const items = phase.result.items;
    const rows = renderRows(items);
    rows.forEach((row, i) => {
      const tr = document.createElement("tr");
      const titleCell = document.createElement("td");
      const link = document.createElement("a");
      link.href = "#";
      link.textContent = row.title;
      link.addEventListener("click", (event) => {
        event.preventDefault();
        void showDetail(items[i].movie_id);
      });
      titleCell.appendChild(link);
      for (const text of [row.rank, undefined, row.year, row.sim, row.base_pred]) {
        if (text === undefined) {
          tr.appendChild(titleCell);
          continue;
        }
        const td = document.createElement("td");
        td.textContent = text;
        tr.appendChild(td);
      }
      resultsBody.appendChild(tr);
    });
    const t = phase.result.timing;
    recommendStatus.textContent = `ranked in ${String(t.total_ms)} ms (llm ${String(t.llm_ms)} ms)`;
  }

  function render(): void {
    renderSearch();
    renderChips();
    renderRecommend();
    if (store.search.kind === "failed") {
      showBanner(`service unreachable: ${store.search.message}`);
    }
  }

  store.onChange = render;

  let debounce: ReturnType<typeof setTimeout> | undefined;
  searchBox.addEventListener("input", () => {
    if (debounce !== undefined) clearTimeout(debounce);
    debounce = setTimeout(() => void store.runSearch(searchBox.value), DEBOUNCE_MS);
  });

  prefText.addEventListener("input", () => {
    store.draft.preference_text = prefText.value;
  });
  ratingPref.addEventListener("change", () => {
    store.draft.rating_pref = ratingPref.checked;
  });
  popularityPref.addEventListener("change", () => {
    store.draft.popularity_pref = popularityPref.checked;
  });
  yearMin.addEventListener("change", () => {
    store.draft.year_min = yearMin.value === "" ? null : Number(yearMin.value);
  });
  yearMax.addEventListener("change", () => {
    store.draft.year_max = yearMax.value === "" ? null : Number(yearMax.value);
  });
  nInput.addEventListener("change", () => {
    store.n = Number(nInput.value);
  });
  goButton.addEventListener("click", () => void store.runRecommend());

  async function connect(): Promise<void> {
    banner.classList.add("hidden");
    try {
      const health = await api.health();
      healthLine.textContent =
        `${health.algo} model · ${String(health.users)} users · ` +
        `${String(health.movies)} movies · data ${health.dataset_fingerprint}`;
    } catch (err) {
      healthLine.textContent = "offline";
      showBanner(err instanceof ApiError ? err.message : String(err));
    }
  }

  bannerRetry.addEventListener("click", () => {
    banner.classList.add("hidden");
    void connect();
    if (searchBox.value.trim()) void store.runSearch(searchBox.value);
  });

  void connect();
}

main();
