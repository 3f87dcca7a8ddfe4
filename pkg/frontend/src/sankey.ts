import type { SankeyPayload } from './types';

export interface SankeyBand {
  source: string;
  target: string;
  value: number;
  thickness: number; // device pixels
  offset: number; // vertical start within the diagram, pixels
}

export interface SankeyLayout {
  focus: string;
  bands: SankeyBand[];
  totalHeight: number;
}

/**
 * Stack the flow links into bands whose pixel thickness is linearly
 * proportional to the link value; the largest link gets maxBandPx.
 */
export function layoutSankey(payload: SankeyPayload, maxBandPx = 80, gapPx = 4): SankeyLayout {
  const links = [...payload.links].sort((a, b) => b.value - a.value);
  const top = links.length > 0 ? links[0]!.value : 0;
  const bands: SankeyBand[] = [];
  let offset = 0;
  for (const link of links) {
    const thickness = top > 0 ? Math.round((link.value / top) * maxBandPx) : 0;
    bands.push({ ...link, thickness, offset });
    offset += thickness + gapPx;
  }
  return {
    focus: payload.focus,
    bands,
    totalHeight: bands.length > 0 ? offset - gapPx : 0,
  };
}
