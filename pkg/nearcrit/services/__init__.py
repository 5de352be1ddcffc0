"""Services package."""
from nearcrit.services.unionfind import UnionFind
