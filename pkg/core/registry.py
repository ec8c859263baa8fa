"""Decorator-based registration of model and plot classes."""

from typing import Dict, List, Optional, Type


class Registry:
    """Maps ids such as 'cprob_unet' or 'distribution.violin' to classes."""

    def __init__(self, kind: str):
        self.kind = kind
        self._entries: Dict[str, Type] = {}
        self._categories: Dict[str, List[str]] = {}

    def register(self, name: Optional[str] = None, category: Optional[str] = None):
        """Decorator for registering a class.

        Args:
            name: Registry id; defaults to the lower-cased class name
            category: Optional grouping; the id becomes 'category.name'
        """
        def decorator(cls):
            entry = name or cls.__name__.lower()
            entry_id = f"{category}.{entry}" if category else entry
            if entry_id in self._entries and self._entries[entry_id] is not cls:
                raise ValueError(f"{self.kind} '{entry_id}' is already registered")
            self._entries[entry_id] = cls
            if category:
                self._categories.setdefault(category, [])
                if entry_id not in self._categories[category]:
                    self._categories[category].append(entry_id)
            cls.registry_id = entry_id
            return cls
        return decorator

    def get(self, entry_id: str) -> Type:
        if entry_id not in self._entries:
            known = ", ".join(sorted(self._entries)) or "none"
            raise ValueError(f"unknown {self.kind} '{entry_id}' (known: {known})")
        return self._entries[entry_id]

    def create(self, entry_id: str, *args, **kwargs):
        return self.get(entry_id)(*args, **kwargs)

    def ids(self) -> List[str]:
        return sorted(self._entries)

    def in_category(self, category: str) -> List[str]:
        return list(self._categories.get(category, []))

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._entries


model_registry = Registry("model")
plot_registry = Registry("plot")
