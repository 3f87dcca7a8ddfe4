import { describe, expect, it } from 'vitest';
import { layoutSankey } from '../src/sankey';
import type { SankeyPayload } from '../src/types';
import { loadFixture } from './helpers';

const payload = loadFixture<SankeyPayload>('sankey_A.json');

describe('sankey layout', () => {
  it('renders link values 100 and 50 at a 2:1 pixel thickness ratio', () => {
    const layout = layoutSankey(payload);
    const big = layout.bands.find((b) => b.value === 100.0)!;
    const small = layout.bands.find((b) => b.value === 50.0)!;
    expect(Math.abs(big.thickness - 2 * small.thickness)).toBeLessThanOrEqual(1);
    expect(Math.abs(big.thickness / small.thickness - 2)).toBeLessThan(0.05);
  });

  it('stacks bands without overlap', () => {
    const layout = layoutSankey(payload);
    const sorted = [...layout.bands].sort((a, b) => a.offset - b.offset);
    for (let i = 1; i < sorted.length; i++) {
      expect(sorted[i]!.offset).toBeGreaterThanOrEqual(
        sorted[i - 1]!.offset + sorted[i - 1]!.thickness,
      );
    }
    expect(layout.totalHeight).toBeGreaterThan(0);
  });

  it('thickness is linear in value', () => {
    const layout = layoutSankey(payload, 100);
    for (const band of layout.bands) {
      expect(band.thickness).toBe(Math.round(band.value));
    }
  });

  it('handles an empty flow', () => {
    const layout = layoutSankey({ ...payload, links: [] });
    expect(layout.bands).toHaveLength(0);
    expect(layout.totalHeight).toBe(0);
  });
});
