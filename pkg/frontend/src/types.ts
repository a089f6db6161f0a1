export interface Region {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface SelectionState {
  queryId: string | null;
  region: Region | null;
  k: number;
  groupClasses: number | null;
}

export interface ImageInfo {
  id: string;
  class_label: string;
  thumbnail_url: string;
}

export interface SearchResult {
  rank: number;
  id: string;
  class_label: string;
  score: number;
  map_url: string;
}
