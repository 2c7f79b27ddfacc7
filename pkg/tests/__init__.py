"""
Пакет тестов для строительного Telegram-бота.
Содержит автоматические тесты для проверки функциональности различных частей бота.
"""

# Импортируем пакеты тестов
# import tests.client  (пакет отсутствует в этом проекте)
# Пока еще не реализованы тесты админки
# import tests.admin 