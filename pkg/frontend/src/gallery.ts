/**
 * Ranked-gallery view model. Item order is copied verbatim from the
 * query response; the only local arithmetic is display rounding.
 */

import type { QueryResponse, RankedItem } from "./api";

export interface GalleryItem {
  sampleId: string;
  score: number;
  scoreLabel: string;
  thumbnail: string;
  rank: number;
  markedFalsePositive: boolean;
}

export interface GalleryView {
  queryEcho: string;
  engine: string;
  items: GalleryItem[];
  timingMs: number;
}

export function buildGallery(resp: QueryResponse): GalleryView {
  return {
    queryEcho: resp.query,
    engine: resp.engine,
    timingMs: resp.timing_ms,
    items: resp.ranked.map((item: RankedItem, i: number) => ({
      sampleId: item.sample_id,
      score: item.score,
      scoreLabel: item.score.toFixed(3),
      thumbnail: item.thumbnail,
      rank: i + 1,
      markedFalsePositive: false,
    })),
  };
}

export function toggleFalsePositive(view: GalleryView, sampleId: string): GalleryView {
  return {
    ...view,
    items: view.items.map((it) =>
      it.sampleId === sampleId
        ? { ...it, markedFalsePositive: !it.markedFalsePositive }
        : it,
    ),
  };
}

function csvEscape(value: string): string {
  return /[",\n]/.test(value) ? `"${value.replace(/"/g, '""')}"` : value;
}

/** Export the gallery (with analyst relevance marks) as CSV text. */
export function galleryToCsv(view: GalleryView): string {
  const lines = ["rank,sample_id,score,false_positive,query"];
  for (const it of view.items) {
    lines.push(
      [
        String(it.rank),
        csvEscape(it.sampleId),
        String(it.score),
        it.markedFalsePositive ? "yes" : "no",
        csvEscape(view.queryEcho),
      ].join(","),
    );
  }
  return lines.join("\n") + "\n";
}
